use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `value <= tolerance`
    Le,
    /// `value >= tolerance`
    Ge,
    /// Not applicable to this fixture.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Row {
    pub fn le(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Row { name: name.into(), value, tolerance, relation: Relation::Le, pass: value <= tolerance, detail: None }
    }

    pub fn ge(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Row { name: name.into(), value, tolerance, relation: Relation::Ge, pass: value >= tolerance, detail: None }
    }

    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Row { name: name.into(), value: f64::NAN, tolerance: f64::NAN, relation: Relation::Skipped, pass: true, detail: Some(reason.into()) }
    }

    /// A check that could not be evaluated counts as failed.
    pub fn error(name: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Row { name: name.into(), value: f64::NAN, tolerance: f64::NAN, relation: Relation::Le, pass: false, detail: Some(err.to_string()) }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn line(&self) -> String {
        let status = match (self.relation, self.pass) {
            (Relation::Skipped, _) => "SKIP",
            (_, true) => "PASS",
            (_, false) => "FAIL",
        };
        let rel = match self.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Skipped => "",
        };
        let mut s = if self.relation == Relation::Skipped {
            format!("{status} {}", self.name)
        } else {
            format!("{status} {} = {:e} ({rel} {:e})", self.name, self.value, self.tolerance)
        };
        if let Some(d) = &self.detail {
            s.push_str(&format!(" [{d}]"));
        }
        s
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_ms: f64,
}

/// A command's result. Everything except `timing` is a function of the
/// fixture bytes, the seed and the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub fixture: String,
    pub fixture_sha256: String,
    pub rng: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    pub rows: Vec<Row>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub data: serde_json::Value,
    pub all_pass: bool,
    pub timing: Timing,
}

impl Report {
    pub fn finish(&mut self) {
        self.all_pass = self.rows.iter().all(|r| r.pass);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}
