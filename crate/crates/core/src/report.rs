//! Report documents and their JSON, Markdown and CSV renderings.

use std::fmt::Write as _;

use serde::Serialize;

use crate::absorption::AbsorptionReport;
use crate::error::{Error, Result};
use crate::mdp::{ConditionS, Diagnostic};
use crate::measure::{HybridMeasure, StatePart};
use crate::number::Number;
use crate::occupation::{Method, OccupationResult};
use crate::topology::ConvergenceReport;

/// Version of the report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
        }
    }
}

/// A checked statement with what was expected and what was computed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Claim {
    pub id: String,
    pub status: Status,
    pub label: String,
    pub expected: String,
    pub computed: String,
    pub anchor: String,
}

impl Claim {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} (expected {}, computed {})",
            self.status.as_str(),
            self.id,
            self.label,
            self.expected,
            self.computed
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZooListing {
    pub name: String,
    pub summary: String,
    pub strategies: Vec<String>,
    pub families: Vec<String>,
    pub batteries: Vec<String>,
    pub datasets: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassRow {
    pub cell: String,
    pub mass: Number,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupationSummary {
    pub model: String,
    pub strategy: String,
    pub x0: String,
    pub method: Method,
    pub total_mass: Number,
    pub tail_bound: Number,
    pub residual: Number,
    pub marginal: Vec<MassRow>,
    pub measure: HybridMeasure,
}

impl OccupationSummary {
    pub fn new(model: &str, strategy: &str, x0: &str, occ: &OccupationResult, float: bool) -> Self {
        let conv = |n: Number| if float { n.to_approx() } else { n };
        let mut marginal: Vec<MassRow> = Vec::new();
        for c in &occ.marginal().merged().components {
            let cell = match &c.state {
                StatePart::Atom { name, .. } => name.clone(),
                StatePart::Point { segment, at } => format!("{segment}@{at}"),
                StatePart::Density { segment, density } => {
                    format!("{segment}[{},{}]", density.lower(), density.upper())
                }
            };
            match marginal.iter_mut().find(|r| r.cell == cell) {
                Some(r) => r.mass = &r.mass + &c.mass(),
                None => marginal.push(MassRow { cell, mass: c.mass() }),
            }
        }
        for r in &mut marginal {
            r.mass = conv(r.mass.clone());
        }
        OccupationSummary {
            model: model.into(),
            strategy: strategy.into(),
            x0: x0.into(),
            method: occ.method,
            total_mass: conv(occ.total_mass()),
            tail_bound: conv(occ.tail_bound.clone()),
            residual: conv(occ.residual.clone()),
            marginal,
            measure: occ.measure.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Body {
    Reproduction,
    ZooList { entries: Vec<ZooListing> },
    Validation { model: String, diagnostics: Vec<Diagnostic>, condition_s: Box<ConditionS> },
    Occupation(Box<OccupationSummary>),
    Absorption(Box<AbsorptionReport>),
    Convergence { reports: Vec<ConvergenceReport> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub schema: u32,
    pub invocation: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub body: Body,
    pub claims: Vec<Claim>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Md,
}

impl ReportDocument {
    pub fn new(invocation: Vec<String>, body: Body, claims: Vec<Claim>, timestamp: bool) -> Self {
        ReportDocument {
            tool: "amdp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            schema: SCHEMA_VERSION,
            invocation,
            timestamp: timestamp.then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
            body,
            claims,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.status == Status::Pass)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Md => Ok(self.markdown()),
            Format::Csv => self.csv(),
        }
    }

    fn markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} {} report\n", self.tool, self.version);
        let _ = writeln!(s, "Invocation: `{}`\n", self.invocation.join(" "));
        if let Some(t) = &self.timestamp {
            let _ = writeln!(s, "Generated: {t}\n");
        }
        match &self.body {
            Body::Reproduction => {}
            Body::ZooList { entries } => {
                s.push_str("| name | summary | datasets |\n|---|---|---|\n");
                for e in entries {
                    let _ = writeln!(s, "| {} | {} | {} |", e.name, e.summary, e.datasets.join(", "));
                }
            }
            Body::Validation { model, diagnostics, condition_s } => {
                let _ = writeln!(s, "Model `{model}`: {} diagnostic(s)\n", diagnostics.len());
                for d in diagnostics {
                    let _ = writeln!(s, "- {d}");
                }
                let _ = writeln!(s, "\nCondition (S): {}", condition_s_text(condition_s));
            }
            Body::Occupation(o) => {
                let _ = writeln!(
                    s,
                    "Strategy `{}` from `{}` ({:?}): total mass {}, tail bound {}, residual {}\n",
                    o.strategy, o.x0, o.method, o.total_mass, o.tail_bound, o.residual
                );
                s.push_str("| cell | mass |\n|---|---|\n");
                for r in &o.marginal {
                    let _ = writeln!(s, "| {} | {} |", r.cell, r.mass);
                }
            }
            Body::Absorption(a) => {
                let _ = writeln!(s, "Family `{}` from `{}`, n_max {}: {:?}\n", a.family, a.x0, a.n_max, a.verdict);
                s.push_str("| strategy | E[tau] | tail at n_max | tail bound |\n|---|---|---|---|\n");
                for r in &a.rows {
                    let _ = writeln!(
                        s,
                        "| {} | {} | {} | {} |",
                        r.strategy, r.expected_time, r.tails[a.n_max], r.tail_bound
                    );
                }
            }
            Body::Convergence { reports } => {
                for r in reports {
                    let _ = writeln!(s, "Battery `{}` ({:?}, tol {:e}): {:?}\n", r.battery, r.mode, r.tol, r.verdict);
                    s.push_str("| function | limit | final gap | converged |\n|---|---|---|---|\n");
                    for t in &r.functions {
                        let last = t.rows.last().map(|x| x.gap).unwrap_or(0.0);
                        let _ = writeln!(s, "| {} | {} | {:e} | {} |", t.function, t.limit_integral, last, t.converged);
                    }
                    let _ = writeln!(s, "\n_{}_\n", r.caveat);
                }
            }
        }
        if !self.claims.is_empty() {
            s.push_str("\n| id | status | claim | expected | computed | anchor |\n|---|---|---|---|---|---|\n");
            for c in &self.claims {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} |",
                    c.id,
                    c.status.as_str(),
                    c.label,
                    c.expected,
                    c.computed,
                    c.anchor
                );
            }
        }
        s
    }

    fn csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let e = |e: csv::Error| Error::Io(std::io::Error::other(e));
            match &self.body {
                Body::ZooList { entries } => {
                    w.write_record(["name", "summary"]).map_err(e)?;
                    for x in entries {
                        w.write_record([&x.name, &x.summary]).map_err(e)?;
                    }
                }
                Body::Validation { diagnostics, .. } => {
                    w.write_record(["location", "message"]).map_err(e)?;
                    for d in diagnostics {
                        w.write_record([&d.location, &d.message]).map_err(e)?;
                    }
                }
                Body::Occupation(o) => {
                    w.write_record(["cell", "mass"]).map_err(e)?;
                    for r in &o.marginal {
                        w.write_record([r.cell.clone(), r.mass.to_string()]).map_err(e)?;
                    }
                }
                Body::Absorption(a) => {
                    w.write_record(["strategy", "n", "tail"]).map_err(e)?;
                    for r in &a.rows {
                        for (n, t) in r.tails.iter().enumerate() {
                            w.write_record([r.strategy.clone(), n.to_string(), t.to_string()]).map_err(e)?;
                        }
                    }
                }
                Body::Convergence { reports } => {
                    drop(w);
                    for r in reports {
                        r.write_csv(&mut buf)?;
                    }
                    return String::from_utf8(buf).map_err(|x| Error::Parse(x.to_string()));
                }
                Body::Reproduction => {
                    w.write_record(["id", "status", "claim", "expected", "computed", "anchor"]).map_err(e)?;
                    for c in &self.claims {
                        w.write_record([&c.id, c.status.as_str(), &c.label, &c.expected, &c.computed, &c.anchor])
                            .map_err(e)?;
                    }
                }
            }
            w.flush()?;
        }
        String::from_utf8(buf).map_err(|x| Error::Parse(x.to_string()))
    }
}

fn condition_s_text(c: &ConditionS) -> String {
    match c {
        ConditionS::HoldsTrivially => "holds (finite actions)".into(),
        ConditionS::Holds => "holds".into(),
        ConditionS::Fails(w) => format!("fails ({w:?})"),
        ConditionS::Unknown => "unknown".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> ReportDocument {
        let claims = vec![
            Claim {
                id: "C1".into(),
                status: Status::Pass,
                label: "one".into(),
                expected: "1".into(),
                computed: "1".into(),
                anchor: "a".into(),
            },
            Claim {
                id: "C2".into(),
                status: Status::Fail,
                label: "two".into(),
                expected: "2".into(),
                computed: "3".into(),
                anchor: "b".into(),
            },
        ];
        ReportDocument::new(vec!["amdp".into(), "reproduce".into()], Body::Reproduction, claims, false)
    }

    #[test]
    fn renders_are_deterministic_without_timestamp() {
        let d = doc();
        for f in [Format::Json, Format::Md, Format::Csv] {
            assert_eq!(d.render(f).unwrap(), doc().render(f).unwrap());
        }
        assert!(!d.render(Format::Json).unwrap().contains("timestamp"));
        assert!(!d.all_pass());
    }

    #[test]
    fn csv_lists_claims() {
        let text = doc().render(Format::Csv).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(2).unwrap().starts_with("C2,FAIL"));
    }

    #[test]
    fn claim_line() {
        assert_eq!(doc().claims[0].line(), "PASS C1: one (expected 1, computed 1)");
    }
}
