//! Typed entity relation graph: explicit lecture-concept / course-concept
//! edges from the corpus, implicit same-type edges induced from shared
//! neighbors, and corrupted negative sampling for the ranking objective.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::corpus::Corpus;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("implicit-edge threshold must be at least 1")]
    BadThreshold,

    #[error("edge endpoints {0} and {1} are not graph vertices")]
    UnknownEdge(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexType {
    Concept,
    Lecture,
    Course,
}

impl fmt::Display for VertexType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VertexType::Concept => "concept",
            VertexType::Lecture => "lecture",
            VertexType::Course => "course",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Vertex {
    pub id: String,
    pub vtype: VertexType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeType {
    LectureConcept,
    CourseConcept,
    ConceptConcept,
    LectureLecture,
    CourseCourse,
}

impl EdgeType {
    pub fn is_implicit(self) -> bool {
        matches!(
            self,
            EdgeType::ConceptConcept | EdgeType::LectureLecture | EdgeType::CourseCourse
        )
    }

    fn between(a: VertexType, b: VertexType) -> Option<Self> {
        use VertexType::*;
        match (a, b) {
            (Lecture, Concept) | (Concept, Lecture) => Some(EdgeType::LectureConcept),
            (Course, Concept) | (Concept, Course) => Some(EdgeType::CourseConcept),
            (Concept, Concept) => Some(EdgeType::ConceptConcept),
            (Lecture, Lecture) => Some(EdgeType::LectureLecture),
            (Course, Course) => Some(EdgeType::CourseCourse),
            _ => None,
        }
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeType::LectureConcept => "lecture-concept",
            EdgeType::CourseConcept => "course-concept",
            EdgeType::ConceptConcept => "concept-concept",
            EdgeType::LectureLecture => "lecture-lecture",
            EdgeType::CourseCourse => "course-course",
        })
    }
}

/// Undirected edge stored canonically with `a < b` (vertex indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub etype: EdgeType,
}

/// One corrupted destination for a directed presentation of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegativeSample {
    pub src: usize,
    pub dst_corrupt: usize,
}

/// Negative draws plus a starvation marker for edges where every
/// same-type corruption already exists in the graph.
#[derive(Debug, Clone)]
pub struct NegativeDraw {
    pub samples: Vec<NegativeSample>,
    pub starved: bool,
}

/// Immutable after construction; negative sampling takes caller-owned RNGs.
#[derive(Debug, Clone)]
pub struct RelationGraph {
    vertices: Vec<Vertex>,
    index: HashMap<(VertexType, String), usize>,
    /// Vertex indices per type, ascending; corruption candidate pools.
    by_type: HashMap<VertexType, Vec<usize>>,
    edges: Vec<Edge>,
    edge_set: HashSet<(usize, usize)>,
    /// Adjacency over explicit edges only; implicit induction reads this.
    explicit_adj: Vec<BTreeSet<usize>>,
}

impl RelationGraph {
    fn new(vertices: Vec<Vertex>) -> Self {
        let mut index = HashMap::new();
        let mut by_type: HashMap<VertexType, Vec<usize>> = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            index.insert((v.vtype, v.id.clone()), i);
            by_type.entry(v.vtype).or_default().push(i);
        }
        let n = vertices.len();
        Self {
            vertices,
            index,
            by_type,
            edges: Vec::new(),
            edge_set: HashSet::new(),
            explicit_adj: vec![BTreeSet::new(); n],
        }
    }

    fn insert_edge(&mut self, a: usize, b: usize) -> bool {
        debug_assert_ne!(a, b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if !self.edge_set.insert((lo, hi)) {
            return false;
        }
        let etype = EdgeType::between(self.vertices[lo].vtype, self.vertices[hi].vtype)
            .expect("vertex types always pair");
        if !etype.is_implicit() {
            self.explicit_adj[lo].insert(hi);
            self.explicit_adj[hi].insert(lo);
        }
        self.edges.push(Edge { a: lo, b: hi, etype });
        true
    }

    pub fn vertex(&self, i: usize) -> &Vertex {
        &self.vertices[i]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_idx(&self, vtype: VertexType, id: &str) -> Option<usize> {
        self.index.get(&(vtype, id.to_string())).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Canonical membership: direction does not matter.
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.edge_set.contains(&(lo, hi))
    }

    /// Shared-neighbor count in the explicit graph.
    pub fn shared_explicit_neighbors(&self, a: usize, b: usize) -> usize {
        self.explicit_adj[a]
            .intersection(&self.explicit_adj[b])
            .count()
    }

    /// Add an implicit edge between every same-type pair whose explicit
    /// shared-neighbor count reaches `threshold`. Idempotent; existing
    /// edges are untouched.
    pub fn induce_implicit(mut self, threshold: usize) -> Result<Self, GraphError> {
        if threshold < 1 {
            return Err(GraphError::BadThreshold);
        }
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for hub in 0..self.vertices.len() {
            let neighbors: Vec<usize> = self.explicit_adj[hub].iter().copied().collect();
            for (i, &a) in neighbors.iter().enumerate() {
                for &b in &neighbors[i + 1..] {
                    if self.vertices[a].vtype == self.vertices[b].vtype {
                        *counts.entry((a, b)).or_default() += 1;
                    }
                }
            }
        }
        let mut additions: Vec<(usize, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= threshold)
            .map(|(pair, _)| pair)
            .collect();
        additions.sort_unstable();
        for (a, b) in additions {
            self.insert_edge(a, b);
        }
        Ok(self)
    }

    /// Draw up to `k` corruptions of the destination of `(src, dst)`,
    /// uniformly without replacement from same-type vertices `d'` with
    /// `(src, d')` absent from the graph. Fewer than `k` eligible returns
    /// them all; zero eligible returns an empty, starved draw.
    pub fn sample_negatives<R: Rng>(
        &self,
        src: usize,
        dst: usize,
        k: usize,
        rng: &mut R,
    ) -> NegativeDraw {
        let dtype = self.vertices[dst].vtype;
        let pool = self.by_type.get(&dtype).map(Vec::as_slice).unwrap_or(&[]);
        let mut eligible: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|&d| d != dst && d != src && !self.has_edge(src, d))
            .collect();
        if eligible.is_empty() {
            return NegativeDraw {
                samples: Vec::new(),
                starved: true,
            };
        }
        let take = k.min(eligible.len());
        // Partial Fisher-Yates over the sorted pool keeps draws uniform
        // and reproducible for a given RNG stream.
        for i in 0..take {
            let j = rng.gen_range(i..eligible.len());
            eligible.swap(i, j);
        }
        NegativeDraw {
            samples: eligible[..take]
                .iter()
                .map(|&d| NegativeSample {
                    src,
                    dst_corrupt: d,
                })
                .collect(),
            starved: false,
        }
    }

    /// Edge list as TSV lines: `src_id  src_type  dst_id  dst_type  etype`.
    pub fn export_edges(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let (a, b) = (&self.vertices[e.a], &self.vertices[e.b]);
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                a.id, a.vtype, b.id, b.vtype, e.etype
            ));
        }
        out
    }
}

/// Build the explicit graph: one vertex per entity, a lecture-concept edge
/// per tagging, and a course-concept edge for every course whose lectures
/// the concept tags (deduplicated).
pub fn build_explicit(corpus: &Corpus) -> RelationGraph {
    let mut vertices = Vec::new();
    for c in &corpus.concepts {
        vertices.push(Vertex {
            id: c.id.clone(),
            vtype: VertexType::Concept,
        });
    }
    for l in &corpus.lectures {
        vertices.push(Vertex {
            id: l.id.clone(),
            vtype: VertexType::Lecture,
        });
    }
    for c in &corpus.courses {
        vertices.push(Vertex {
            id: c.id.clone(),
            vtype: VertexType::Course,
        });
    }
    let mut graph = RelationGraph::new(vertices);
    let concept_base = 0usize;
    let lecture_base = corpus.concepts.len();
    let course_base = lecture_base + corpus.lectures.len();

    for (li, lecture) in corpus.lectures.iter().enumerate() {
        for cid in &lecture.concept_ids {
            let ci = corpus.concept_idx(cid).expect("validated");
            graph.insert_edge(concept_base + ci, lecture_base + li);
        }
    }
    for course in 0..corpus.courses.len() {
        let mut seen = BTreeSet::new();
        for li in corpus.course_lecture_seq(course) {
            for cid in &corpus.lectures[li].concept_ids {
                seen.insert(corpus.concept_idx(cid).expect("validated"));
            }
        }
        for ci in seen {
            graph.insert_edge(concept_base + ci, course_base + course);
        }
    }
    graph
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Concept, Corpus, Course, Lecture, Module};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corpus_with(tags: &[&[&str]], concepts: &[&str]) -> Corpus {
        let concepts = concepts
            .iter()
            .map(|id| Concept {
                id: id.to_string(),
                name: format!("name {id}"),
                description: String::new(),
            })
            .collect();
        let lectures: Vec<Lecture> = tags
            .iter()
            .enumerate()
            .map(|(i, tag)| Lecture {
                id: format!("l{i}"),
                name: format!("lecture {i}"),
                description: String::new(),
                concept_ids: tag.iter().map(|s| s.to_string()).collect(),
            })
            .collect();
        let module = Module {
            id: "m0".into(),
            lecture_ids: lectures.iter().map(|l| l.id.clone()).collect(),
        };
        Corpus::build(
            concepts,
            lectures,
            vec![module],
            vec![Course {
                id: "crs0".into(),
                name: "course".into(),
                module_ids: vec!["m0".into()],
            }],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn one_lecture_two_concepts_yields_four_edges() {
        let corpus = corpus_with(&[&["a", "b"]], &["a", "b"]);
        let g = build_explicit(&corpus);
        let lc = g
            .edges()
            .iter()
            .filter(|e| e.etype == EdgeType::LectureConcept)
            .count();
        let cc = g
            .edges()
            .iter()
            .filter(|e| e.etype == EdgeType::CourseConcept)
            .count();
        assert_eq!((lc, cc), (2, 2));
    }

    #[test]
    fn untagged_lectures_give_no_edges() {
        let corpus = corpus_with(&[&[], &[]], &["a"]);
        let g = build_explicit(&corpus);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn course_concept_edges_deduplicate() {
        let corpus = corpus_with(&[&["a"], &["a"]], &["a"]);
        let g = build_explicit(&corpus);
        let lc = g
            .edges()
            .iter()
            .filter(|e| e.etype == EdgeType::LectureConcept)
            .count();
        let cc = g
            .edges()
            .iter()
            .filter(|e| e.etype == EdgeType::CourseConcept)
            .count();
        assert_eq!((lc, cc), (2, 1));
    }

    #[test]
    fn implicit_edge_needs_threshold_shared_neighbors() {
        // Two lectures sharing three concepts.
        let corpus = corpus_with(&[&["a", "b", "c"], &["a", "b", "c"]], &["a", "b", "c"]);
        let g = build_explicit(&corpus);
        let l0 = g.vertex_idx(VertexType::Lecture, "l0").unwrap();
        let l1 = g.vertex_idx(VertexType::Lecture, "l1").unwrap();
        assert_eq!(g.shared_explicit_neighbors(l0, l1), 3);

        let with2 = g.clone().induce_implicit(2).unwrap();
        assert!(with2.has_edge(l0, l1));

        let with4 = g.clone().induce_implicit(4).unwrap();
        assert!(!with4.has_edge(l0, l1));
    }

    #[test]
    fn courses_sharing_one_concept_link_at_threshold_one() {
        let concepts = vec![Concept {
            id: "a".into(),
            name: "a".into(),
            description: String::new(),
        }];
        let lectures: Vec<Lecture> = (0..2)
            .map(|i| Lecture {
                id: format!("l{i}"),
                name: format!("lec {i}"),
                description: String::new(),
                concept_ids: vec!["a".into()],
            })
            .collect();
        let modules = vec![
            Module {
                id: "m0".into(),
                lecture_ids: vec!["l0".into()],
            },
            Module {
                id: "m1".into(),
                lecture_ids: vec!["l1".into()],
            },
        ];
        let courses = vec![
            Course {
                id: "crs0".into(),
                name: "x".into(),
                module_ids: vec!["m0".into()],
            },
            Course {
                id: "crs1".into(),
                name: "y".into(),
                module_ids: vec!["m1".into()],
            },
        ];
        let corpus = Corpus::build(concepts, lectures, modules, courses, vec![]).unwrap();
        let g = build_explicit(&corpus).induce_implicit(1).unwrap();
        let c0 = g.vertex_idx(VertexType::Course, "crs0").unwrap();
        let c1 = g.vertex_idx(VertexType::Course, "crs1").unwrap();
        assert!(g.has_edge(c0, c1));
        // Threshold 1 also links the two lectures through the shared concept.
        let l0 = g.vertex_idx(VertexType::Lecture, "l0").unwrap();
        let l1 = g.vertex_idx(VertexType::Lecture, "l1").unwrap();
        assert!(g.has_edge(l0, l1));
    }

    #[test]
    fn induce_implicit_is_idempotent() {
        let corpus = corpus_with(&[&["a", "b"], &["a", "b"], &["b"]], &["a", "b"]);
        let once = build_explicit(&corpus).induce_implicit(2).unwrap();
        let twice = once.clone().induce_implicit(2).unwrap();
        assert_eq!(once.edges(), twice.edges());
    }

    #[test]
    fn threshold_zero_is_rejected() {
        let corpus = corpus_with(&[&["a"]], &["a"]);
        assert!(matches!(
            build_explicit(&corpus).induce_implicit(0),
            Err(GraphError::BadThreshold)
        ));
    }

    #[test]
    fn edge_membership_ignores_direction() {
        let corpus = corpus_with(&[&["a"]], &["a"]);
        let g = build_explicit(&corpus);
        let c = g.vertex_idx(VertexType::Concept, "a").unwrap();
        let l = g.vertex_idx(VertexType::Lecture, "l0").unwrap();
        assert!(g.has_edge(c, l));
        assert!(g.has_edge(l, c));
    }

    #[test]
    fn corrupting_finds_exactly_the_unlinked_lecture() {
        let corpus = corpus_with(&[&["a"], &[]], &["a"]);
        let g = build_explicit(&corpus);
        let c = g.vertex_idx(VertexType::Concept, "a").unwrap();
        let l0 = g.vertex_idx(VertexType::Lecture, "l0").unwrap();
        let l1 = g.vertex_idx(VertexType::Lecture, "l1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let draw = g.sample_negatives(c, l0, 5, &mut rng);
        assert!(!draw.starved);
        assert_eq!(
            draw.samples,
            vec![NegativeSample {
                src: c,
                dst_corrupt: l1
            }]
        );
    }

    #[test]
    fn fully_linked_concept_starves() {
        let corpus = corpus_with(&[&["a"], &["a"]], &["a"]);
        let g = build_explicit(&corpus);
        let c = g.vertex_idx(VertexType::Concept, "a").unwrap();
        let l0 = g.vertex_idx(VertexType::Lecture, "l0").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let draw = g.sample_negatives(c, l0, 3, &mut rng);
        assert!(draw.starved);
        assert!(draw.samples.is_empty());
    }

    #[test]
    fn same_seed_draws_identical_negatives() {
        let corpus = corpus_with(
            &[&["a"], &[], &[], &[], &[], &[]],
            &["a"],
        );
        let g = build_explicit(&corpus);
        let c = g.vertex_idx(VertexType::Concept, "a").unwrap();
        let l0 = g.vertex_idx(VertexType::Lecture, "l0").unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            g.sample_negatives(c, l0, 3, &mut rng).samples
        };
        assert_eq!(draw(9), draw(9));
    }

    proptest! {
        /// Random small bipartite tagging; every draw must be a valid
        /// corruption: same destination type, absent from the graph.
        #[test]
        fn negatives_are_valid_corruptions(
            tag_bits in proptest::collection::vec(0u8..8, 2..6),
            seed in 0u64..1000,
            k in 1usize..6,
        ) {
            let concepts = ["a", "b", "c"];
            let tags: Vec<Vec<&str>> = tag_bits
                .iter()
                .map(|bits| {
                    concepts
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| bits & (1 << i) != 0)
                        .map(|(_, c)| *c)
                        .collect()
                })
                .collect();
            let tag_slices: Vec<&[&str]> = tags.iter().map(Vec::as_slice).collect();
            let corpus = corpus_with(&tag_slices, &concepts);
            let g = build_explicit(&corpus).induce_implicit(2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for e in g.edges() {
                for (src, dst) in [(e.a, e.b), (e.b, e.a)] {
                    let draw = g.sample_negatives(src, dst, k, &mut rng);
                    for s in &draw.samples {
                        prop_assert_eq!(g.vertex(s.dst_corrupt).vtype, g.vertex(dst).vtype);
                        prop_assert!(!g.has_edge(s.src, s.dst_corrupt));
                        prop_assert_ne!(s.dst_corrupt, dst);
                    }
                    let unique: std::collections::HashSet<usize> =
                        draw.samples.iter().map(|s| s.dst_corrupt).collect();
                    prop_assert_eq!(unique.len(), draw.samples.len());
                }
            }
        }
    }
}
