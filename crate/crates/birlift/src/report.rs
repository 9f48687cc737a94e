//! Versioned JSON reports. Reports carry no timings, so identical inputs
//! and seeds give byte-identical output.

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA: &str = "birlift-report/1";

/// Process exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exit {
    Ok = 0,
    /// The contract or integrity property does not hold (or is unknown).
    ContractFails = 1,
    /// Decoding, lifting or co-simulation failed.
    Lift = 2,
    Typing = 3,
    /// Loops, indirect jumps, missing labels, malformed input files.
    Structural = 4,
    /// Missing solver, unreadable files, malformed solver output.
    Environment = 5,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Stage {
    pub name: &'static str,
    /// The obligation this stage discharges.
    pub discharges: &'static str,
    pub ok: bool,
    pub summary: String,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: &'static str,
    pub status: Exit,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub stages: Vec<Stage>,
}

impl Report {
    pub fn new(command: &'static str, seed: Option<u64>) -> Report {
        Report { schema: SCHEMA, command, status: Exit::Ok, exit_code: 0, seed, stages: Vec::new() }
    }

    pub fn stage(
        &mut self,
        name: &'static str,
        discharges: &'static str,
        ok: bool,
        summary: impl Into<String>,
        details: Value,
    ) {
        self.stages.push(Stage { name, discharges, ok, summary: summary.into(), details });
    }

    /// Records a failure; the first failure determines the exit status.
    pub fn fail(&mut self, e: Exit) {
        if self.status == Exit::Ok {
            self.status = e;
            self.exit_code = e.code();
        }
    }

    pub fn ok(&self) -> bool {
        self.status == Exit::Ok
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// One line per stage.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for st in &self.stages {
            s.push_str(&format!("{:<12} {}  {}\n", st.name, if st.ok { "ok  " } else { "FAIL" }, st.summary));
        }
        s.push_str(&format!("status: {:?} (exit {})\n", self.status, self.exit_code));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_failure_wins() {
        let mut r = Report::new("verify", Some(7));
        r.stage("lift", "x", true, "fine", Value::Null);
        r.fail(Exit::Typing);
        r.fail(Exit::ContractFails);
        assert_eq!(r.exit_code, 3);
        let j: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(j["schema"], "birlift-report/1");
        assert_eq!(j["status"], "typing");
        assert!(j["stages"][0].get("details").is_none());
    }
}
