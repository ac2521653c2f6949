use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, IssueSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn code(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Valid => 1,
            Split::Test => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Split::Train),
            1 => Some(Split::Valid),
            2 => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    WithinProject,
    CrossWithinRepo,
    CrossRepo,
}

/// Train/valid/test fractions for a chronological split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            valid: 0.2,
            test: 0.2,
        }
    }
}

/// Split assignment for every in-scope issue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub assignment: BTreeMap<String, Split>,
    pub scenario: Scenario,
    pub source_project: Option<String>,
    pub target_project: Option<String>,
}

impl SplitMasks {
    pub fn get(&self, key: &str) -> Option<Split> {
        self.assignment.get(key).copied()
    }

    pub fn count(&self, split: Split) -> usize {
        self.assignment.values().filter(|&&s| s == split).count()
    }

    /// In-scope keys with the given split, sorted.
    pub fn keys(&self, split: Split) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &s)| s == split)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

// Guard against 0.6 * n landing a hair under an integer.
fn floor_count(ratio: f64, n: usize) -> usize {
    (ratio * n as f64 + 1e-9).floor() as usize
}

/// Chronological split of one project: the earliest `floor(train*n)` issues
/// train, the next `floor(valid*n)` validate, the rest test.
pub fn split_within_project(
    set: &IssueSet,
    project: &str,
    ratios: SplitRatios,
) -> Result<SplitMasks, CorpusError> {
    let r = [ratios.train, ratios.valid, ratios.test];
    if r.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadRatios(r));
    }
    let issues = set.project_issues(project)?;
    let n = issues.len();
    let n_train = floor_count(ratios.train, n);
    let n_valid = floor_count(ratios.valid, n).min(n - n_train);
    let assignment = issues
        .iter()
        .enumerate()
        .map(|(pos, issue)| {
            let split = if pos < n_train {
                Split::Train
            } else if pos < n_train + n_valid {
                Split::Valid
            } else {
                Split::Test
            };
            (issue.issue_key.clone(), split)
        })
        .collect();
    Ok(SplitMasks {
        assignment,
        scenario: Scenario::WithinProject,
        source_project: Some(project.to_string()),
        target_project: Some(project.to_string()),
    })
}

/// Cross-project split: every source issue trains, every target issue tests.
/// With `valid_tail`, the chronologically last 10% of the source validates.
pub fn split_cross(
    set: &IssueSet,
    source: &str,
    target: &str,
    scenario: Scenario,
    valid_tail: bool,
) -> Result<SplitMasks, CorpusError> {
    if source == target {
        return Err(CorpusError::SameProject(source.to_string()));
    }
    let src = set.project_issues(source)?;
    let tgt = set.project_issues(target)?;
    let n_valid = if valid_tail {
        floor_count(0.1, src.len())
    } else {
        0
    };
    let first_valid = src.len() - n_valid;
    let mut assignment = BTreeMap::new();
    for (pos, issue) in src.iter().enumerate() {
        let s = if pos >= first_valid {
            Split::Valid
        } else {
            Split::Train
        };
        assignment.insert(issue.issue_key.clone(), s);
    }
    for issue in tgt {
        assignment.insert(issue.issue_key.clone(), Split::Test);
    }
    Ok(SplitMasks {
        assignment,
        scenario,
        source_project: Some(source.to_string()),
        target_project: Some(target.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Issue;

    fn project(name: &str, n: usize) -> Vec<Issue> {
        (0..n)
            .map(|i| Issue {
                issue_key: format!("{name}-{i}"),
                project: name.into(),
                repository: "R".into(),
                title: "t".into(),
                description: String::new(),
                story_point: Some(1.0),
                ordinal: i,
            })
            .collect()
    }

    fn counts(m: &SplitMasks) -> (usize, usize, usize) {
        (
            m.count(Split::Train),
            m.count(Split::Valid),
            m.count(Split::Test),
        )
    }

    #[test]
    fn ten_issues_split_six_two_two() {
        let set = IssueSet::new(project("P", 10)).unwrap();
        let m = split_within_project(&set, "P", SplitRatios::default()).unwrap();
        assert_eq!(counts(&m), (6, 2, 2));
        assert_eq!(m.get("P-5"), Some(Split::Train));
        assert_eq!(m.get("P-6"), Some(Split::Valid));
        assert_eq!(m.get("P-8"), Some(Split::Test));
    }

    #[test]
    fn floor_rule_small_and_usergrid_sized() {
        let set = IssueSet::new(project("P", 5)).unwrap();
        let m = split_within_project(&set, "P", SplitRatios::default()).unwrap();
        assert_eq!(counts(&m), (3, 1, 1));
        let set = IssueSet::new(project("UG", 482)).unwrap();
        let m = split_within_project(&set, "UG", SplitRatios::default()).unwrap();
        assert_eq!(counts(&m), (289, 96, 97));
    }

    #[test]
    fn unknown_project_and_bad_ratios() {
        let set = IssueSet::new(project("P", 5)).unwrap();
        assert!(matches!(
            split_within_project(&set, "Q", SplitRatios::default()),
            Err(CorpusError::UnknownProject(_))
        ));
        let bad = SplitRatios {
            train: 0.7,
            valid: 0.2,
            test: 0.2,
        };
        assert!(matches!(
            split_within_project(&set, "P", bad),
            Err(CorpusError::BadRatios(_))
        ));
    }

    #[test]
    fn cross_split_assigns_all() {
        let mut v = project("CV", 384);
        v.extend(project("UG", 482));
        let set = IssueSet::new(v).unwrap();
        let m = split_cross(&set, "CV", "UG", Scenario::CrossRepo, false).unwrap();
        assert_eq!(counts(&m), (384, 0, 482));
        let m = split_cross(&set, "CV", "UG", Scenario::CrossRepo, true).unwrap();
        assert_eq!(counts(&m), (346, 38, 482));
        assert_eq!(m.get("CV-383"), Some(Split::Valid));
        assert!(matches!(
            split_cross(&set, "CV", "CV", Scenario::CrossRepo, false),
            Err(CorpusError::SameProject(_))
        ));
        assert!(matches!(
            split_cross(&set, "CV", "XX", Scenario::CrossRepo, false),
            Err(CorpusError::UnknownProject(_))
        ));
    }
}
