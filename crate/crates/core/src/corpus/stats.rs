//! Corpus summary statistics.

use std::collections::HashSet;

use super::Corpus;

/// Entity counts and per-entity means, in the shape of the usual dataset
/// overview table.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub concepts: usize,
    pub courses: usize,
    pub lectures: usize,
    pub lectures_per_course: f64,
    pub concepts_per_course: f64,
    pub concepts_per_lecture: f64,
    pub users: usize,
    /// Absent when there are no interaction logs.
    pub interactions_per_user: Option<f64>,
}

pub fn summarize(corpus: &Corpus) -> CorpusStats {
    let n_courses = corpus.courses.len();
    let n_lectures = corpus.lectures.len();

    let mut lecture_total = 0usize;
    let mut concept_course_total = 0usize;
    for course in 0..n_courses {
        let seq = corpus.course_lecture_seq(course);
        lecture_total += seq.len();
        let distinct: HashSet<&str> = seq
            .iter()
            .flat_map(|&l| corpus.lectures[l].concept_ids.iter().map(String::as_str))
            .collect();
        concept_course_total += distinct.len();
    }
    let concept_lecture_total: usize = corpus
        .lectures
        .iter()
        .map(|l| l.concept_ids.len())
        .sum();

    let mean = |total: usize, n: usize| if n == 0 { 0.0 } else { total as f64 / n as f64 };
    let users = corpus.interactions.len();
    let interactions_per_user = if users == 0 {
        None
    } else {
        let total: usize = corpus.interactions.iter().map(|l| l.lecture_ids.len()).sum();
        Some(total as f64 / users as f64)
    };

    CorpusStats {
        concepts: corpus.concepts.len(),
        courses: n_courses,
        lectures: n_lectures,
        lectures_per_course: mean(lecture_total, n_courses),
        concepts_per_course: mean(concept_course_total, n_courses),
        concepts_per_lecture: mean(concept_lecture_total, n_lectures),
        users,
        interactions_per_user,
    }
}
