//! Line-delimited JSON ingestion and export.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Concept, Corpus, CorpusError, Course, InteractionLog, Lecture, Module, PrereqLabel};

#[derive(Debug, Serialize, Deserialize)]
struct CourseRecord {
    id: String,
    name: String,
    modules: Vec<Module>,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            file: path.display().to_string(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for record in records {
        let line = serde_json::to_string(record).expect("serializable record");
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Load a corpus from a directory of `.jsonl` files.
///
/// `interactions.jsonl` is optional; the entity files are required.
pub fn load_corpus(dir: &Path) -> Result<Corpus, CorpusError> {
    let concepts: Vec<Concept> = read_jsonl(&dir.join("concepts.jsonl"))?;
    let lectures: Vec<Lecture> = read_jsonl(&dir.join("lectures.jsonl"))?;
    let course_records: Vec<CourseRecord> = read_jsonl(&dir.join("courses.jsonl"))?;
    let interactions_path = dir.join("interactions.jsonl");
    let interactions: Vec<InteractionLog> = if interactions_path.exists() {
        read_jsonl(&interactions_path)?
    } else {
        Vec::new()
    };

    let mut modules = Vec::new();
    let mut courses = Vec::new();
    for record in course_records {
        let module_ids = record.modules.iter().map(|m| m.id.clone()).collect();
        modules.extend(record.modules);
        courses.push(Course {
            id: record.id,
            name: record.name,
            module_ids,
        });
    }
    Corpus::build(concepts, lectures, modules, courses, interactions)
}

/// Write a corpus back out in the same directory layout.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<(), CorpusError> {
    std::fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write_jsonl(&dir.join("concepts.jsonl"), &corpus.concepts)?;
    write_jsonl(&dir.join("lectures.jsonl"), &corpus.lectures)?;
    let records: Vec<CourseRecord> = corpus
        .courses
        .iter()
        .map(|course| CourseRecord {
            id: course.id.clone(),
            name: course.name.clone(),
            modules: course
                .module_ids
                .iter()
                .map(|mid| corpus.modules[corpus.module_idx(mid).expect("validated")].clone())
                .collect(),
        })
        .collect();
    write_jsonl(&dir.join("courses.jsonl"), &records)?;
    write_jsonl(&dir.join("interactions.jsonl"), &corpus.interactions)?;
    Ok(())
}

/// Load prerequisite labels; the file is optional at the CLI level, so a
/// missing file is the caller's concern.
pub fn load_prereqs(path: &Path) -> Result<Vec<PrereqLabel>, CorpusError> {
    read_jsonl(path)
}

pub fn save_prereqs(labels: &[PrereqLabel], path: &Path) -> Result<(), CorpusError> {
    write_jsonl(path, labels)
}
