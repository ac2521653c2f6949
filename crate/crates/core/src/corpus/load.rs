use std::fs::File;
use std::path::Path;

use super::{CorpusError, Issue, IssueSet};

/// Column names of the CSV export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub key: String,
    pub title: String,
    pub description: String,
    /// `None` loads unlabeled issues.
    pub story_point: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            key: "issuekey".into(),
            title: "title".into(),
            description: "description".into(),
            story_point: Some("storypoint".into()),
        }
    }
}

impl ColumnMap {
    pub fn unlabeled() -> Self {
        Self {
            story_point: None,
            ..Self::default()
        }
    }
}

/// A known project of the public story-point dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectInfo {
    pub abbreviation: &'static str,
    pub name: &'static str,
    pub repository: &'static str,
    /// File stem of the project's CSV export.
    pub file_stem: &'static str,
    pub issue_count: usize,
}

macro_rules! project {
    ($abb:literal, $name:literal, $repo:literal, $stem:literal, $n:literal) => {
        ProjectInfo {
            abbreviation: $abb,
            name: $name,
            repository: $repo,
            file_stem: $stem,
            issue_count: $n,
        }
    };
}

/// The sixteen projects, with their published issue counts.
pub const DEEP_SE_PROJECTS: [ProjectInfo; 16] = [
    project!("ME", "Mesos", "Apache", "mesos", 1680),
    project!("UG", "Usergrid", "Apache", "usergrid", 482),
    project!(
        "AS",
        "Appcelerator Studio",
        "Appcelerator",
        "appceleratorstudio",
        2919
    ),
    project!("AP", "Aptana Studio", "Appcelerator", "aptanastudio", 829),
    project!("TI", "Titanium", "Appcelerator", "titanium", 2251),
    project!("DC", "DuraCloud", "DuraSpace", "duracloud", 666),
    project!("BB", "Bamboo", "Atlassian", "bamboo", 521),
    project!("CV", "Clover", "Atlassian", "clover", 384),
    project!("JI", "JIRA Software", "Atlassian", "jirasoftware", 352),
    project!("MD", "Moodle", "Moodle", "moodle", 1166),
    project!("DM", "Data Management", "Lsstcorp", "datamanagement", 4667),
    project!("MU", "Mule", "Mulesoft", "mule", 889),
    project!("MS", "Mule Studio", "Mulesoft", "mulestudio", 732),
    project!("XD", "Spring XD", "Spring", "springxd", 3526),
    project!(
        "TD",
        "Talend Data Quality",
        "Talendforge",
        "talenddataquality",
        1381
    ),
    project!("TE", "Talend ESB", "Talendforge", "talendesb", 868),
];

/// Looks a project up by abbreviation or file stem (case-insensitive).
pub fn known_project(name: &str) -> Option<&'static ProjectInfo> {
    let lower = name.to_ascii_lowercase();
    DEEP_SE_PROJECTS
        .iter()
        .find(|p| p.abbreviation.eq_ignore_ascii_case(name) || p.file_stem == lower)
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_story_point(row: usize, raw: &str) -> Result<f64, CorpusError> {
    let bad = || CorpusError::BadStoryPoint {
        row,
        value: raw.to_string(),
    };
    let v: f64 = raw.trim().parse().map_err(|_| bad())?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Loads one CSV export. Row order becomes the ordinal.
pub fn load_csv(
    path: impl AsRef<Path>,
    columns: &ColumnMap,
    project: &str,
    repository: &str,
) -> Result<IssueSet, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(std::io::BufReader::new(file));

    let headers = reader
        .headers()
        .map_err(|e| CorpusError::MalformedCsv {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}') == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let key_col = col(&columns.key)?;
    let title_col = col(&columns.title)?;
    let desc_col = col(&columns.description)?;
    let sp_col = columns.story_point.as_deref().map(col).transpose()?;

    let mut issues = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CorpusError::MalformedCsv {
            row,
            message: e.to_string(),
        })?;
        let field = |c: usize| record.get(c).unwrap_or("").to_string();
        let title = field(title_col);
        let description = field(desc_col);
        if title.trim().is_empty() && description.trim().is_empty() {
            return Err(CorpusError::EmptyText { row });
        }
        let story_point = sp_col
            .map(|c| parse_story_point(row, record.get(c).unwrap_or("")))
            .transpose()?;
        issues.push(Issue {
            issue_key: field(key_col),
            project: project.to_string(),
            repository: repository.to_string(),
            title,
            description,
            story_point,
            ordinal: row,
        });
    }
    IssueSet::new(issues)
}

/// Loads every `*.csv` in a directory, in file-name order. Known dataset
/// file stems map to their abbreviation and repository; anything else uses
/// the upper-cased stem for both.
pub fn load_dataset_dir(
    dir: impl AsRef<Path>,
    columns: &ColumnMap,
) -> Result<IssueSet, CorpusError> {
    let dir = dir.as_ref();
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CorpusError::EmptyDirectory(dir.display().to_string()));
    }
    let mut sets = Vec::with_capacity(files.len());
    for f in files {
        let stem = f
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .to_string();
        let (abb, repo) = match known_project(&stem) {
            Some(p) => (p.abbreviation.to_string(), p.repository.to_string()),
            None => (stem.to_uppercase(), stem.to_uppercase()),
        };
        sets.push(load_csv(&f, columns, &abb, &repo)?);
    }
    IssueSet::concat(sets)
}

fn format_story_point(v: f64) -> String {
    format!("{v}")
}

/// Writes issues back out with the default column names.
pub fn write_csv(set: &IssueSet, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let to_err = |e: csv::Error| CorpusError::MalformedCsv {
        row: 0,
        message: e.to_string(),
    };
    let cols = ColumnMap::default();
    w.write_record([
        cols.key.as_str(),
        cols.title.as_str(),
        cols.description.as_str(),
        cols.story_point.as_deref().unwrap_or("storypoint"),
    ])
    .map_err(to_err)?;
    let mut ordered: Vec<&Issue> = set.issues().iter().collect();
    ordered.sort_by_key(|i| i.ordinal);
    for i in ordered {
        let sp = i.story_point.map(format_story_point).unwrap_or_default();
        w.write_record([i.issue_key.as_str(), &i.title, &i.description, &sp])
            .map_err(to_err)?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_rows_in_order() {
        let f = write_tmp("issuekey,title,description,storypoint\nA-1,t,d,3\nA-2,t2,,5\n");
        let set = load_csv(f.path(), &ColumnMap::default(), "A", "R").unwrap();
        assert_eq!(set.len(), 2);
        let i = set.issues();
        assert_eq!((i[0].ordinal, i[1].ordinal), (0, 1));
        assert_eq!(i[1].description, "");
        assert_eq!(i[0].story_point, Some(3.0));
        assert_eq!(set.project_issues("A").unwrap().len(), 2);
    }

    #[test]
    fn quoted_newlines_survive() {
        let f =
            write_tmp("issuekey,title,description,storypoint\nA-1,t,\"line one\nline, two\",2\n");
        let set = load_csv(f.path(), &ColumnMap::default(), "A", "R").unwrap();
        assert_eq!(set.issues()[0].description, "line one\nline, two");
    }

    #[test]
    fn negative_story_point_rejected() {
        let f = write_tmp("issuekey,title,description,storypoint\nA-1,t,d,-1\n");
        let err = load_csv(f.path(), &ColumnMap::default(), "A", "R").unwrap_err();
        assert!(matches!(err, CorpusError::BadStoryPoint { row: 0, .. }));
        let f = write_tmp("issuekey,title,description,storypoint\nA-1,t,d,abc\n");
        assert!(matches!(
            load_csv(f.path(), &ColumnMap::default(), "A", "R"),
            Err(CorpusError::BadStoryPoint { .. })
        ));
    }

    #[test]
    fn missing_column_reported() {
        let f = write_tmp("key,title,description,storypoint\nA-1,t,d,1\n");
        let err = load_csv(f.path(), &ColumnMap::default(), "A", "R").unwrap_err();
        assert!(matches!(err, CorpusError::MissingColumn(c) if c == "issuekey"));
    }

    #[test]
    fn ragged_row_is_malformed() {
        let f = write_tmp("issuekey,title,description,storypoint\nA-1,t,d\n");
        assert!(matches!(
            load_csv(f.path(), &ColumnMap::default(), "A", "R"),
            Err(CorpusError::MalformedCsv { row: 0, .. })
        ));
    }

    #[test]
    fn duplicate_keys_rejected() {
        let f = write_tmp("issuekey,title,description,storypoint\nA-1,t,d,1\nA-1,u,e,2\n");
        assert!(matches!(
            load_csv(f.path(), &ColumnMap::default(), "A", "R"),
            Err(CorpusError::DuplicateKey(_))
        ));
    }

    #[test]
    fn unlabeled_columns() {
        let f = write_tmp("issuekey,title,description\nA-1,t,d\n");
        let set = load_csv(f.path(), &ColumnMap::unlabeled(), "A", "R").unwrap();
        assert_eq!(set.issues()[0].story_point, None);
    }

    #[test]
    fn dataset_table_totals() {
        let total: usize = DEEP_SE_PROJECTS.iter().map(|p| p.issue_count).sum();
        assert_eq!(total, 23313);
        assert_eq!(known_project("clover").unwrap().abbreviation, "CV");
        assert_eq!(known_project("ug").unwrap().file_stem, "usergrid");
    }
}
