//! Instances, groups and the validated dataset that ties them together.
//!
//! Both file formats are JSON lines. Instances:
//!
//! ```text
//! {"id": "s1", "features": [0.1, -0.4, ...], "label": 1}
//! ```
//!
//! Groups:
//!
//! ```text
//! {"id": "r1", "score": 1.0, "members": ["s1", "s2"], "tags": ["movie-42"]}
//! ```
//!
//! A group is a multiset: a member listed twice counts twice toward the
//! group mean.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A single instance: an identified feature vector.
///
/// The optional ground-truth label is kept out of reach of training code;
/// it is only readable through [`Instance::evaluation_label`].
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T> {
    id: String,
    features: Vec<T>,
    truth: Option<bool>,
}

impl<T: Scalar> Instance<T> {
    pub fn new(id: impl Into<String>, features: Vec<T>) -> Self {
        Self {
            id: id.into(),
            features,
            truth: None,
        }
    }

    pub fn with_label(mut self, positive: bool) -> Self {
        self.truth = Some(positive);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    /// Hidden ground truth. Evaluation code only; nothing in training or
    /// scoring reads this.
    pub fn evaluation_label(&self) -> Option<bool> {
        self.truth
    }
}

/// An identified multiset of instance references with an observed score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub id: String,
    pub score: f64,
    pub members: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

impl Group {
    pub fn new(id: impl Into<String>, score: f64, members: Vec<String>) -> Self {
        Self {
            id: id.into(),
            score,
            members,
            tags: Vec::new(),
        }
    }

    pub fn with_tags(mut self, tags: Vec<String>) -> Self {
        self.tags = tags;
        self
    }
}

#[derive(Deserialize)]
struct InstanceRecord {
    id: String,
    features: Vec<serde_json::Value>,
    #[serde(default)]
    label: Option<u8>,
}

#[derive(Serialize)]
struct InstanceRecordOut<'a> {
    id: &'a str,
    features: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
}

/// Rewrites bare `NaN` / `Infinity` / `-Infinity` tokens (as emitted by
/// Python's `json.dumps`) into strings so the record parses and the
/// offending component can be reported by position.
fn quote_non_finite_tokens(line: &str) -> String {
    let mut out = String::with_capacity(line.len() + 16);
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = line;
    while let Some(c) = rest.chars().next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c == '"' {
            in_string = true;
            out.push(c);
            rest = &rest[1..];
            continue;
        }
        let token = ["-Infinity", "Infinity", "NaN"]
            .into_iter()
            .find(|t| rest.starts_with(t));
        match token {
            Some(t) => {
                out.push('"');
                out.push_str(t);
                out.push('"');
                rest = &rest[t.len()..];
            }
            None => {
                out.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    out
}

fn parse_instance_line<T: Scalar>(
    raw: &str,
    line: usize,
    dim: &mut Option<usize>,
) -> Result<Instance<T>> {
    let record: InstanceRecord = match serde_json::from_str(raw) {
        Ok(r) => r,
        Err(first) => serde_json::from_str(&quote_non_finite_tokens(raw)).map_err(|_| {
            Error::MalformedLine {
                line,
                message: first.to_string(),
            }
        })?,
    };
    let mut features = Vec::with_capacity(record.features.len());
    for (index, value) in record.features.iter().enumerate() {
        let v = match value {
            serde_json::Value::Number(n) => n.as_f64(),
            serde_json::Value::String(s)
                if matches!(s.as_str(), "NaN" | "Infinity" | "-Infinity") =>
            {
                Some(f64::NAN)
            }
            _ => None,
        };
        let Some(v) = v else {
            return Err(Error::MalformedLine {
                line,
                message: format!("feature {index} is not a number"),
            });
        };
        let x = T::of(v);
        if !x.is_finite() {
            return Err(Error::NonFiniteFeature {
                line,
                id: record.id,
                index,
            });
        }
        features.push(x);
    }
    let expected = *dim.get_or_insert(features.len());
    if features.len() != expected || expected == 0 {
        return Err(Error::DimensionMismatch {
            line,
            id: record.id,
            expected,
            found: features.len(),
        });
    }
    let truth = match record.label {
        None => None,
        Some(0) => Some(false),
        Some(1) => Some(true),
        Some(other) => {
            return Err(Error::MalformedLine {
                line,
                message: format!("label must be 0 or 1, got {other}"),
            })
        }
    };
    Ok(Instance {
        id: record.id,
        features,
        truth,
    })
}

/// Parses an instances stream. When `dim` is `None` the first record fixes it.
pub fn read_instances<T: Scalar, R: BufRead>(
    reader: R,
    dim: Option<usize>,
) -> Result<Vec<Instance<T>>> {
    let mut dim = dim;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, raw) in reader.lines().enumerate() {
        let line = n + 1;
        let raw = raw.map_err(|e| Error::MalformedLine {
            line,
            message: e.to_string(),
        })?;
        if raw.trim().is_empty() {
            continue;
        }
        let inst = parse_instance_line::<T>(&raw, line, &mut dim)?;
        if !seen.insert(inst.id.clone()) {
            return Err(Error::DuplicateId { line, id: inst.id });
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn load_instances<T: Scalar>(
    path: impl AsRef<Path>,
    dim: Option<usize>,
) -> Result<Vec<Instance<T>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_instances(BufReader::new(file), dim)
}

/// Parses a groups stream, resolving every member against `instances`.
pub fn read_groups<T: Scalar, R: BufRead>(
    reader: R,
    instances: &[Instance<T>],
) -> Result<Vec<Group>> {
    let known: HashSet<&str> = instances.iter().map(|i| i.id.as_str()).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, raw) in reader.lines().enumerate() {
        let line = n + 1;
        let raw = raw.map_err(|e| Error::MalformedLine {
            line,
            message: e.to_string(),
        })?;
        if raw.trim().is_empty() {
            continue;
        }
        let group: Group = serde_json::from_str(&raw).map_err(|e| Error::MalformedLine {
            line,
            message: e.to_string(),
        })?;
        if !(0.0..=1.0).contains(&group.score) {
            return Err(Error::ScoreOutOfRange {
                line,
                group: group.id,
                score: group.score,
            });
        }
        if group.members.is_empty() {
            return Err(Error::EmptyGroup {
                line,
                group: group.id,
            });
        }
        if let Some(m) = group.members.iter().find(|m| !known.contains(m.as_str())) {
            return Err(Error::UnresolvedMember {
                line,
                member: m.clone(),
                group: group.id,
            });
        }
        if !seen.insert(group.id.clone()) {
            return Err(Error::DuplicateId { line, id: group.id });
        }
        out.push(group);
    }
    Ok(out)
}

pub fn load_groups<T: Scalar>(
    path: impl AsRef<Path>,
    instances: &[Instance<T>],
) -> Result<Vec<Group>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_groups(BufReader::new(file), instances)
}

/// One violated invariant, naming the offending record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Issue {
    NoInstances,
    NoGroups,
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
    NonFiniteFeature {
        id: String,
    },
    DuplicateInstance {
        id: String,
    },
    DuplicateGroup {
        id: String,
    },
    EmptyGroup {
        group: String,
    },
    ScoreOutOfRange {
        group: String,
    },
    UnresolvedMember {
        group: String,
        member: String,
    },
    UncoveredInstance {
        id: String,
    },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::NoInstances => write!(f, "dataset has no instances"),
            Issue::NoGroups => write!(f, "dataset has no groups"),
            Issue::DimensionMismatch {
                id,
                expected,
                found,
            } => {
                write!(
                    f,
                    "instance '{id}' has dimension {found}, expected {expected}"
                )
            }
            Issue::NonFiniteFeature { id } => write!(f, "instance '{id}' has a non-finite feature"),
            Issue::DuplicateInstance { id } => write!(f, "duplicate instance id '{id}'"),
            Issue::DuplicateGroup { id } => write!(f, "duplicate group id '{id}'"),
            Issue::EmptyGroup { group } => write!(f, "group '{group}' has no members"),
            Issue::ScoreOutOfRange { group } => {
                write!(f, "group '{group}' has a score outside [0, 1]")
            }
            Issue::UnresolvedMember { group, member } => {
                write!(f, "group '{group}' references unknown instance '{member}'")
            }
            Issue::UncoveredInstance { id } => write!(f, "instance '{id}' belongs to no group"),
        }
    }
}

/// Every invariant a candidate dataset violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dataset validation failed with {} issue(s)",
            self.issues.len()
        )?;
        for issue in &self.issues {
            write!(f, "\n  - {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

/// Coverage policy: whether every instance must appear in some group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    Strict,
    Lenient,
}

/// Result of a successful validation. `warnings` lists instances that no
/// group references (only possible under [`Coverage::Lenient`]).
#[derive(Debug, Clone)]
pub struct Validated<T> {
    pub dataset: Dataset<T>,
    pub warnings: Vec<Issue>,
}

/// Validated instances and groups with resolved membership. Immutable.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    instances: Vec<Instance<T>>,
    groups: Vec<Group>,
    members: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
    dim: usize,
}

impl<T: PartialEq> PartialEq for Dataset<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.instances == other.instances && self.groups == other.groups
    }
}

/// Which groups to keep when restricting a dataset to a context.
#[derive(Debug, Clone)]
pub enum GroupSelector {
    Ids(BTreeSet<String>),
    Tag(String),
    All,
}

impl GroupSelector {
    fn selects(&self, group: &Group) -> bool {
        match self {
            GroupSelector::Ids(ids) => ids.contains(&group.id),
            GroupSelector::Tag(tag) => group.tags.iter().any(|t| t == tag),
            GroupSelector::All => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub n_instances: usize,
    pub n_groups: usize,
    pub dim: usize,
    pub mean_group_size: f64,
    /// Group scores in ten equal-width bins over [0, 1]; 1.0 lands in the last.
    pub score_histogram: [usize; 10],
}

impl<T: Scalar> Dataset<T> {
    /// Checks every invariant and returns the dataset iff all hold.
    pub fn validate(
        instances: Vec<Instance<T>>,
        groups: Vec<Group>,
        coverage: Coverage,
    ) -> std::result::Result<Validated<T>, ValidationReport> {
        let mut issues = Vec::new();
        if instances.is_empty() {
            issues.push(Issue::NoInstances);
        }
        if groups.is_empty() {
            issues.push(Issue::NoGroups);
        }
        let dim = instances.first().map_or(0, Instance::dim);
        let mut index = HashMap::with_capacity(instances.len());
        for (i, inst) in instances.iter().enumerate() {
            if inst.dim() != dim || dim == 0 {
                issues.push(Issue::DimensionMismatch {
                    id: inst.id.clone(),
                    expected: dim,
                    found: inst.dim(),
                });
            }
            if inst.features.iter().any(|x| !x.is_finite()) {
                issues.push(Issue::NonFiniteFeature {
                    id: inst.id.clone(),
                });
            }
            if index.insert(inst.id.clone(), i).is_some() {
                issues.push(Issue::DuplicateInstance {
                    id: inst.id.clone(),
                });
            }
        }
        let mut group_ids = HashSet::new();
        let mut covered = vec![false; instances.len()];
        let mut members = Vec::with_capacity(groups.len());
        for g in &groups {
            if !group_ids.insert(g.id.as_str()) {
                issues.push(Issue::DuplicateGroup { id: g.id.clone() });
            }
            if g.members.is_empty() {
                issues.push(Issue::EmptyGroup {
                    group: g.id.clone(),
                });
            }
            if !(0.0..=1.0).contains(&g.score) {
                issues.push(Issue::ScoreOutOfRange {
                    group: g.id.clone(),
                });
            }
            let mut resolved = Vec::with_capacity(g.members.len());
            for m in &g.members {
                match index.get(m) {
                    Some(&i) => {
                        covered[i] = true;
                        resolved.push(i);
                    }
                    None => issues.push(Issue::UnresolvedMember {
                        group: g.id.clone(),
                        member: m.clone(),
                    }),
                }
            }
            members.push(resolved);
        }
        let uncovered: Vec<Issue> = instances
            .iter()
            .zip(&covered)
            .filter(|(_, &c)| !c)
            .map(|(inst, _)| Issue::UncoveredInstance {
                id: inst.id.clone(),
            })
            .collect();
        let warnings = match coverage {
            Coverage::Strict => {
                issues.extend(uncovered);
                Vec::new()
            }
            Coverage::Lenient => uncovered,
        };
        if !issues.is_empty() {
            return Err(ValidationReport { issues });
        }
        Ok(Validated {
            dataset: Dataset {
                instances,
                groups,
                members,
                index,
                dim,
            },
            warnings,
        })
    }

    /// Loads and validates both files.
    pub fn load(
        instances_path: impl AsRef<Path>,
        groups_path: impl AsRef<Path>,
        dim: Option<usize>,
        coverage: Coverage,
    ) -> Result<Validated<T>> {
        let instances = load_instances(instances_path, dim)?;
        let groups = load_groups(groups_path, &instances)?;
        Ok(Self::validate(instances, groups, coverage)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn instances(&self) -> &[Instance<T>] {
        &self.instances
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    /// Resolved member indices of group `g`, in listed order, duplicates kept.
    pub fn members(&self, g: usize) -> &[usize] {
        &self.members[g]
    }

    pub fn instance_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn group_index(&self, id: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.id == id)
    }

    pub fn features(&self, i: usize) -> &[T] {
        &self.instances[i].features
    }

    /// Keeps only the selected groups and the instances they reference.
    pub fn filter_groups(&self, selector: &GroupSelector) -> Result<Dataset<T>> {
        let keep: Vec<usize> = (0..self.groups.len())
            .filter(|&g| selector.selects(&self.groups[g]))
            .collect();
        if keep.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut referenced = vec![false; self.instances.len()];
        for &g in &keep {
            for &i in &self.members[g] {
                referenced[i] = true;
            }
        }
        let mut remap = vec![usize::MAX; self.instances.len()];
        let mut instances = Vec::new();
        let mut index = HashMap::new();
        for (i, inst) in self.instances.iter().enumerate() {
            if referenced[i] {
                remap[i] = instances.len();
                index.insert(inst.id.clone(), instances.len());
                instances.push(inst.clone());
            }
        }
        let groups = keep.iter().map(|&g| self.groups[g].clone()).collect();
        let members = keep
            .iter()
            .map(|&g| self.members[g].iter().map(|&i| remap[i]).collect())
            .collect();
        Ok(Dataset {
            instances,
            groups,
            members,
            index,
            dim: self.dim,
        })
    }

    pub fn stats(&self) -> DatasetStats {
        let total: usize = self.members.iter().map(Vec::len).sum();
        let mut score_histogram = [0usize; 10];
        for g in &self.groups {
            let bin = ((g.score * 10.0).floor() as usize).min(9);
            score_histogram[bin] += 1;
        }
        DatasetStats {
            n_instances: self.instances.len(),
            n_groups: self.groups.len(),
            dim: self.dim,
            mean_group_size: total as f64 / self.groups.len() as f64,
            score_histogram,
        }
    }

    /// SHA-256 over ids and feature bit patterns, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for inst in &self.instances {
            h.update(inst.id.as_bytes());
            h.update([0u8]);
            for x in &inst.features {
                h.update(x.as_f64().to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write_instances<W: Write>(&self, out: W) -> Result<()> {
        write_instances(&self.instances, out)
    }

    pub fn write_groups<W: Write>(&self, mut out: W) -> Result<()> {
        for g in &self.groups {
            serde_json::to_writer(&mut out, g)?;
            out.write_all(b"\n").map_err(|e| Error::io("<groups>", e))?;
        }
        Ok(())
    }

    /// Writes `instances.jsonl` and `groups.jsonl` into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| {
            let p = dir.join(name);
            File::create(&p)
                .map(BufWriter::new)
                .map_err(|e| Error::io(p, e))
        };
        let mut w = create("instances.jsonl")?;
        self.write_instances(&mut w)?;
        w.flush().map_err(|e| Error::io(dir, e))?;
        let mut w = create("groups.jsonl")?;
        self.write_groups(&mut w)?;
        w.flush().map_err(|e| Error::io(dir, e))?;
        Ok(())
    }
}

pub fn write_instances<T: Scalar, W: Write>(instances: &[Instance<T>], mut out: W) -> Result<()> {
    for inst in instances {
        let rec = InstanceRecordOut {
            id: &inst.id,
            features: inst.features.iter().map(|x| x.as_f64()).collect(),
            label: inst.truth.map(u8::from),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<instances>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: &str, f: &[f64]) -> Instance<f64> {
        Instance::new(id, f.to_vec())
    }

    fn two_instances() -> Vec<Instance<f64>> {
        vec![inst("s1", &[0.0, 0.0]), inst("s2", &[1.0, 0.0])]
    }

    #[test]
    fn parses_minimal_instance() {
        let v: Vec<Instance<f64>> =
            read_instances(r#"{"id":"s1","features":[0.0,0.0]}"#.as_bytes(), None).unwrap();
        assert_eq!(v, vec![inst("s1", &[0.0, 0.0])]);
        assert_eq!(v[0].evaluation_label(), None);
    }

    #[test]
    fn accepts_24_dim_vectors() {
        let feats: Vec<String> = (0..24).map(|k| format!("{}", k as f64 * 0.1)).collect();
        let line = format!(
            r#"{{"id":"s1","features":[{}],"label":1}}"#,
            feats.join(",")
        );
        let v: Vec<Instance<f32>> = read_instances(line.as_bytes(), Some(24)).unwrap();
        assert_eq!(v[0].dim(), 24);
        assert_eq!(v[0].evaluation_label(), Some(true));
    }

    #[test]
    fn rejects_nan_feature() {
        let err = read_instances::<f64, _>(r#"{"id":"s1","features":[0.0,NaN]}"#.as_bytes(), None)
            .unwrap_err();
        assert!(
            matches!(
                err,
                Error::NonFiniteFeature {
                    line: 1,
                    index: 1,
                    ..
                }
            ),
            "{err}"
        );
        let err =
            read_instances::<f64, _>(r#"{"id":"s1","features":[-Infinity]}"#.as_bytes(), None)
                .unwrap_err();
        assert!(matches!(err, Error::NonFiniteFeature { .. }));
    }

    #[test]
    fn f32_overflow_is_non_finite() {
        let err = read_instances::<f32, _>(r#"{"id":"s1","features":[1e300]}"#.as_bytes(), None)
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteFeature { .. }));
    }

    #[test]
    fn nan_inside_string_id_is_left_alone() {
        let v: Vec<Instance<f64>> =
            read_instances(r#"{"id":"NaN","features":[1.0]}"#.as_bytes(), None).unwrap();
        assert_eq!(v[0].id(), "NaN");
    }

    #[test]
    fn reports_line_numbers() {
        let text = "{\"id\":\"a\",\"features\":[1.0]}\n\n{\"id\":\"b\",\"features\":[1.0,2.0]}\n";
        let err = read_instances::<f64, _>(text.as_bytes(), None).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                line: 3,
                expected: 1,
                found: 2,
                ..
            }
        ));
        let err =
            read_instances::<f64, _>("{\"id\":\"a\",\"features\":[1.0]}\n{oops".as_bytes(), None)
                .unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 2, .. }));
        let text = "{\"id\":\"a\",\"features\":[1.0]}\n{\"id\":\"a\",\"features\":[2.0]}";
        assert!(matches!(
            read_instances::<f64, _>(text.as_bytes(), None).unwrap_err(),
            Error::DuplicateId { line: 2, .. }
        ));
    }

    #[test]
    fn parses_group() {
        let g = read_groups(
            r#"{"id":"r1","score":1.0,"members":["s1","s2"]}"#.as_bytes(),
            &two_instances(),
        )
        .unwrap();
        assert_eq!(
            g,
            vec![Group::new("r1", 1.0, vec!["s1".into(), "s2".into()])]
        );
    }

    #[test]
    fn group_errors() {
        let insts = two_instances();
        let err = read_groups(
            r#"{"id":"r1","score":1.5,"members":["s1"]}"#.as_bytes(),
            &insts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ScoreOutOfRange { .. }));
        let err = read_groups(
            r#"{"id":"r1","score":1.0,"members":["zz"]}"#.as_bytes(),
            &insts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnresolvedMember { ref member, .. } if member == "zz"));
        let err =
            read_groups(r#"{"id":"r1","score":1.0,"members":[]}"#.as_bytes(), &insts).unwrap_err();
        assert!(matches!(err, Error::EmptyGroup { .. }));
    }

    #[test]
    fn coverage_policy() {
        let both = vec![Group::new("r1", 1.0, vec!["s1".into(), "s2".into()])];
        assert!(Dataset::validate(two_instances(), both, Coverage::Strict).is_ok());

        let one = vec![Group::new("r1", 1.0, vec!["s1".into()])];
        let report = Dataset::validate(two_instances(), one.clone(), Coverage::Strict).unwrap_err();
        assert_eq!(
            report.issues,
            vec![Issue::UncoveredInstance { id: "s2".into() }]
        );

        let ok = Dataset::validate(two_instances(), one, Coverage::Lenient).unwrap();
        assert_eq!(ok.warnings.len(), 1);
    }

    #[test]
    fn validation_aggregates_every_issue() {
        let insts = vec![
            inst("a", &[1.0]),
            inst("a", &[1.0, 2.0]),
            inst("c", &[f64::NAN]),
        ];
        let groups = vec![
            Group::new("g", 2.0, vec!["a".into(), "x".into()]),
            Group::new("g", 0.5, vec![]),
        ];
        let report = Dataset::validate(insts, groups, Coverage::Lenient).unwrap_err();
        let text = report.to_string();
        for needle in [
            "dimension 2",
            "'c' has a non-finite",
            "duplicate instance id 'a'",
            "duplicate group id 'g'",
            "unknown instance 'x'",
            "no members",
            "outside [0, 1]",
        ] {
            assert!(text.contains(needle), "missing {needle} in {text}");
        }
    }

    fn sample() -> Dataset<f64> {
        let insts = vec![
            inst("a", &[0.0]),
            inst("b", &[1.0]),
            inst("c", &[2.0]),
            inst("d", &[3.0]),
        ];
        let groups = vec![
            Group::new("r1", 1.0, vec!["a".into(), "b".into(), "a".into()])
                .with_tags(vec!["m1".into()]),
            Group::new("r2", 0.0, vec!["c".into(), "d".into()]).with_tags(vec!["m2".into()]),
        ];
        Dataset::validate(insts, groups, Coverage::Strict)
            .unwrap()
            .dataset
    }

    #[test]
    fn filtering() {
        let d = sample();
        let only_r1 = d
            .filter_groups(&GroupSelector::Ids(["r1".to_string()].into()))
            .unwrap();
        assert_eq!(only_r1.groups().len(), 1);
        let ids: Vec<&str> = only_r1.instances().iter().map(Instance::id).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(only_r1.members(0), &[0, 1, 0]);
        assert_eq!(only_r1.dim(), 1);

        assert_eq!(d.filter_groups(&GroupSelector::All).unwrap(), d);
        let by_tag = d.filter_groups(&GroupSelector::Tag("m2".into())).unwrap();
        assert_eq!(by_tag.groups()[0].id, "r2");
        assert_eq!(
            by_tag
                .filter_groups(&GroupSelector::Tag("m2".into()))
                .unwrap(),
            by_tag
        );
        assert!(matches!(
            d.filter_groups(&GroupSelector::Ids(BTreeSet::new())),
            Err(Error::EmptySelection)
        ));
    }

    #[test]
    fn stats_counts() {
        let insts = vec![inst("a", &[0.0]), inst("b", &[1.0]), inst("c", &[2.0])];
        let groups = vec![Group::new(
            "r",
            1.0,
            vec!["a".into(), "b".into(), "c".into()],
        )];
        let d = Dataset::validate(insts, groups, Coverage::Strict)
            .unwrap()
            .dataset;
        let s = d.stats();
        assert_eq!((s.n_instances, s.n_groups, s.dim), (3, 1, 1));
        assert_eq!(s.mean_group_size, 3.0);
        assert_eq!(s.score_histogram[9], 1);
    }

    #[test]
    fn content_hash_tracks_features() {
        let d = sample();
        let insts = vec![
            inst("a", &[0.0]),
            inst("b", &[1.0]),
            inst("c", &[2.0]),
            inst("d", &[3.5]),
        ];
        let e = Dataset::validate(insts, d.groups().to_vec(), Coverage::Strict)
            .unwrap()
            .dataset;
        assert_eq!(d.content_hash(), sample().content_hash());
        assert_ne!(d.content_hash(), e.content_hash());
    }
}
