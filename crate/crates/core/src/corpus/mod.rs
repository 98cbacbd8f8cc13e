//! Data model, ingestion, validation, and synthetic generation for the
//! MOOC entity hierarchy and learner interaction logs.
//!
//! The on-disk form is a directory of line-delimited JSON files
//! (`concepts.jsonl`, `lectures.jsonl`, `courses.jsonl`,
//! `interactions.jsonl`, `prereqs.jsonl`). In memory everything is
//! cross-referenced by dense indices and immutable after load.

mod load;
mod stats;
mod synth;

pub use load::{load_corpus, load_prereqs, save_corpus, save_prereqs};
pub use stats::{summarize, CorpusStats};
pub use synth::{generate_synthetic, SyntheticConfig};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {file} line {line}: {detail}")]
    Parse {
        file: String,
        line: usize,
        detail: String,
    },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("{context} references missing {kind} `{id}`")]
    DanglingReference {
        context: String,
        kind: &'static str,
        id: String,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("course `{id}` has {count} {what}, configured maximum is {max}")]
    LimitExceeded {
        id: String,
        what: &'static str,
        count: usize,
        max: usize,
    },
}

/// A universal knowledge unit tagged onto lectures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
}

impl Concept {
    /// Text fed to the text encoder; falls back to the name alone.
    pub fn text(&self) -> String {
        join_text(&self.name, &self.description)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lecture {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub concept_ids: Vec<String>,
}

impl Lecture {
    pub fn text(&self) -> String {
        join_text(&self.name, &self.description)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Module {
    pub id: String,
    pub lecture_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Course {
    pub id: String,
    pub name: String,
    pub module_ids: Vec<String>,
}

/// One learner's time-ordered lecture history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionLog {
    pub user_id: String,
    pub lecture_ids: Vec<String>,
}

/// Labeled (possibly negative) prerequisite pair: `a` before `b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrereqLabel {
    pub a: String,
    pub b: String,
    pub label: bool,
}

fn join_text(name: &str, description: &str) -> String {
    if description.trim().is_empty() {
        name.to_string()
    } else {
        format!("{name} {description}")
    }
}

/// Fully cross-referenced corpus; immutable after load.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub concepts: Vec<Concept>,
    pub lectures: Vec<Lecture>,
    pub modules: Vec<Module>,
    pub courses: Vec<Course>,
    pub interactions: Vec<InteractionLog>,
    concept_index: HashMap<String, usize>,
    lecture_index: HashMap<String, usize>,
    module_index: HashMap<String, usize>,
    course_index: HashMap<String, usize>,
}

impl Corpus {
    /// Assemble and validate a corpus from its parts.
    pub fn build(
        concepts: Vec<Concept>,
        lectures: Vec<Lecture>,
        modules: Vec<Module>,
        courses: Vec<Course>,
        interactions: Vec<InteractionLog>,
    ) -> Result<Self, CorpusError> {
        let concept_index = index_ids("concept", concepts.iter().map(|c| c.id.as_str()))?;
        let lecture_index = index_ids("lecture", lectures.iter().map(|l| l.id.as_str()))?;
        let module_index = index_ids("module", modules.iter().map(|m| m.id.as_str()))?;
        let course_index = index_ids("course", courses.iter().map(|c| c.id.as_str()))?;
        let corpus = Self {
            concepts,
            lectures,
            modules,
            courses,
            interactions,
            concept_index,
            lecture_index,
            module_index,
            course_index,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        for concept in &self.concepts {
            if concept.name.trim().is_empty() {
                return Err(CorpusError::Invalid(format!(
                    "concept `{}` has an empty name",
                    concept.id
                )));
            }
        }
        for lecture in &self.lectures {
            let mut seen = std::collections::HashSet::new();
            for cid in &lecture.concept_ids {
                if !self.concept_index.contains_key(cid) {
                    return Err(CorpusError::DanglingReference {
                        context: format!("lecture `{}`", lecture.id),
                        kind: "concept",
                        id: cid.clone(),
                    });
                }
                if !seen.insert(cid) {
                    return Err(CorpusError::Invalid(format!(
                        "lecture `{}` tags concept `{cid}` twice",
                        lecture.id
                    )));
                }
            }
        }
        let mut lecture_owner: HashMap<&str, &str> = HashMap::new();
        for module in &self.modules {
            if module.lecture_ids.is_empty() {
                return Err(CorpusError::Invalid(format!(
                    "module `{}` has no lectures",
                    module.id
                )));
            }
            for lid in &module.lecture_ids {
                if !self.lecture_index.contains_key(lid) {
                    return Err(CorpusError::DanglingReference {
                        context: format!("module `{}`", module.id),
                        kind: "lecture",
                        id: lid.clone(),
                    });
                }
                if let Some(other) = lecture_owner.insert(lid, &module.id) {
                    return Err(CorpusError::Invalid(format!(
                        "lecture `{lid}` belongs to both module `{other}` and module `{}`",
                        module.id
                    )));
                }
            }
        }
        let mut module_owner: HashMap<&str, &str> = HashMap::new();
        for course in &self.courses {
            if course.module_ids.is_empty() {
                return Err(CorpusError::Invalid(format!(
                    "course `{}` has no modules",
                    course.id
                )));
            }
            for mid in &course.module_ids {
                if !self.module_index.contains_key(mid) {
                    return Err(CorpusError::DanglingReference {
                        context: format!("course `{}`", course.id),
                        kind: "module",
                        id: mid.clone(),
                    });
                }
                if let Some(other) = module_owner.insert(mid, &course.id) {
                    return Err(CorpusError::Invalid(format!(
                        "module `{mid}` belongs to both course `{other}` and course `{}`",
                        course.id
                    )));
                }
            }
        }
        for log in &self.interactions {
            for lid in &log.lecture_ids {
                if !self.lecture_index.contains_key(lid) {
                    return Err(CorpusError::DanglingReference {
                        context: format!("interaction log for user `{}`", log.user_id),
                        kind: "lecture",
                        id: lid.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Enforce the configured per-course maxima (encoder capacity).
    pub fn check_limits(&self, max_lectures: usize, max_modules: usize) -> Result<(), CorpusError> {
        for (ci, course) in self.courses.iter().enumerate() {
            let lectures = self.course_lecture_seq(ci).len();
            if lectures > max_lectures {
                return Err(CorpusError::LimitExceeded {
                    id: course.id.clone(),
                    what: "lectures",
                    count: lectures,
                    max: max_lectures,
                });
            }
            if course.module_ids.len() > max_modules {
                return Err(CorpusError::LimitExceeded {
                    id: course.id.clone(),
                    what: "modules",
                    count: course.module_ids.len(),
                    max: max_modules,
                });
            }
        }
        Ok(())
    }

    pub fn concept_idx(&self, id: &str) -> Option<usize> {
        self.concept_index.get(id).copied()
    }

    pub fn lecture_idx(&self, id: &str) -> Option<usize> {
        self.lecture_index.get(id).copied()
    }

    pub fn module_idx(&self, id: &str) -> Option<usize> {
        self.module_index.get(id).copied()
    }

    pub fn course_idx(&self, id: &str) -> Option<usize> {
        self.course_index.get(id).copied()
    }

    /// Lecture indices of a course flattened in module order then lecture
    /// order.
    pub fn course_lecture_seq(&self, course: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for mid in &self.courses[course].module_ids {
            let module = &self.modules[self.module_index[mid]];
            for lid in &module.lecture_ids {
                out.push(self.lecture_index[lid]);
            }
        }
        out
    }

    /// Module position (within its course) of each flattened lecture slot.
    pub fn course_module_positions(&self, course: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for (mpos, mid) in self.courses[course].module_ids.iter().enumerate() {
            let module = &self.modules[self.module_index[mid]];
            out.extend(std::iter::repeat(mpos).take(module.lecture_ids.len()));
        }
        out
    }

    /// Validate a prerequisite label list against this corpus.
    pub fn check_prereqs(&self, labels: &[PrereqLabel]) -> Result<(), CorpusError> {
        for label in labels {
            if label.a == label.b {
                return Err(CorpusError::Invalid(format!(
                    "prerequisite pair with identical endpoints `{}`",
                    label.a
                )));
            }
            for id in [&label.a, &label.b] {
                if !self.concept_index.contains_key(id) {
                    return Err(CorpusError::DanglingReference {
                        context: "prerequisite label".into(),
                        kind: "concept",
                        id: id.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn index_ids<'a>(
    kind: &'static str,
    ids: impl Iterator<Item = &'a str>,
) -> Result<HashMap<String, usize>, CorpusError> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id.to_string(), i).is_some() {
            return Err(CorpusError::DuplicateId {
                kind,
                id: id.to_string(),
            });
        }
    }
    Ok(map)
}

/// Per `(concept, course)` pair: sorted 0-based positions of the concept's
/// lectures within the course's module-flattened lecture sequence.
#[derive(Debug, Clone, Default)]
pub struct OccurrenceIndex {
    positions: BTreeMap<(usize, usize), Vec<usize>>,
}

impl OccurrenceIndex {
    pub fn get(&self, concept: usize, course: usize) -> Option<&[usize]> {
        self.positions.get(&(concept, course)).map(|v| v.as_slice())
    }

    /// Iterate `(concept, course, positions)` in (concept, course) order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &[usize])> {
        self.positions
            .iter()
            .map(|(&(concept, course), v)| (concept, course, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Invert the lecture-concept tagging into per-course occurrence positions.
pub fn occurrence_index(corpus: &Corpus) -> OccurrenceIndex {
    let mut positions: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for course in 0..corpus.courses.len() {
        for (pos, lecture) in corpus.course_lecture_seq(course).into_iter().enumerate() {
            for cid in &corpus.lectures[lecture].concept_ids {
                let concept = corpus.concept_idx(cid).expect("validated");
                positions.entry((concept, course)).or_default().push(pos);
            }
        }
    }
    // Flattening walks each course in order, so positions arrive sorted;
    // dedup guards against a concept tagging one lecture slot twice via
    // distinct lectures (impossible) or future format extensions.
    for v in positions.values_mut() {
        v.dedup();
    }
    OccurrenceIndex { positions }
}
