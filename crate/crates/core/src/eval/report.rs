use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EeErrors {
    pub head: f64,
    pub left_hand: f64,
    pub right_hand: f64,
}

impl EeErrors {
    pub fn new(head: f64, left_hand: f64, right_hand: f64) -> Self {
        Self {
            head,
            left_hand,
            right_hand,
        }
    }

    pub fn from_map(map: &BTreeMap<String, f64>) -> Self {
        let get = |k: &str| map.get(k).copied().unwrap_or(0.0);
        Self::new(get("head"), get("left_hand"), get("right_hand"))
    }

    pub fn values(&self) -> [f64; 3] {
        [self.head, self.left_hand, self.right_hand]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionMetrics {
    pub name: String,
    pub frames: usize,
    /// `None` when the compared skeletons differ in topology.
    pub mjpe_mm: Option<f64>,
    pub ee_cm: EeErrors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Frame-weighted over motions (equal to pooling every frame).
    pub mjpe_mm: Option<f64>,
    /// Unweighted mean of the per-motion values.
    pub mjpe_mm_motion_mean: Option<f64>,
    pub ee_cm: EeErrors,
    pub frames: usize,
}

impl Aggregate {
    pub fn from_motions(motions: &[MotionMetrics]) -> Self {
        let frames: usize = motions.iter().map(|m| m.frames).sum();
        let weighted = |f: &dyn Fn(&MotionMetrics) -> f64| {
            if frames == 0 {
                0.0
            } else {
                motions.iter().map(|m| f(m) * m.frames as f64).sum::<f64>() / frames as f64
            }
        };
        let all_mjpe = !motions.is_empty() && motions.iter().all(|m| m.mjpe_mm.is_some());
        let mjpe = |m: &MotionMetrics| m.mjpe_mm.unwrap_or(0.0);
        Self {
            mjpe_mm: all_mjpe.then(|| weighted(&mjpe)),
            mjpe_mm_motion_mean: all_mjpe
                .then(|| motions.iter().map(mjpe).sum::<f64>() / motions.len() as f64),
            ee_cm: EeErrors::new(
                weighted(&|m| m.ee_cm.head),
                weighted(&|m| m.ee_cm.left_hand),
                weighted(&|m| m.ee_cm.right_hand),
            ),
            frames,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodReference {
    pub ours: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub motion: String,
    /// One entry per method column group.
    pub methods: Vec<EeErrors>,
}

/// Published full-scale results, kept for display next to desk-scale runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConstants {
    pub cycle_mjpe_mm: MethodReference,
    pub cross_method_gap_cm: BTreeMap<String, f64>,
    pub table_methods: Vec<String>,
    pub table: Vec<TableRow>,
}

impl Default for ReferenceConstants {
    fn default() -> Self {
        Self {
            cycle_mjpe_mm: MethodReference {
                ours: 14.7,
                baseline: 32.3,
            },
            cross_method_gap_cm: [("open".to_string(), 9.4), ("wipe".to_string(), 15.4)]
                .into_iter()
                .collect(),
            table_methods: vec!["Ours".into(), "IK-based".into()],
            table: vec![
                TableRow {
                    motion: "Open".into(),
                    methods: vec![
                        EeErrors::new(10.7, 26.1, 17.8),
                        EeErrors::new(11.2, 24.2, 22.5),
                    ],
                },
                TableRow {
                    motion: "Wipe".into(),
                    methods: vec![
                        EeErrors::new(3.8, 31.9, 16.2),
                        EeErrors::new(12.9, 32.2, 36.5),
                    ],
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub aggregate: Aggregate,
    pub per_motion: Vec<MotionMetrics>,
    pub unit_scale_mm: f64,
    /// Identifiers of the skeletons involved.
    pub skeletons: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConstants>,
}

impl MetricsReport {
    pub fn new(per_motion: Vec<MotionMetrics>, unit_scale_mm: f64, skeletons: Vec<String>) -> Self {
        Self {
            aggregate: Aggregate::from_motions(&per_motion),
            per_motion,
            unit_scale_mm,
            skeletons,
            reference: None,
        }
    }

    /// One-line summary of the aggregate.
    pub fn summary(&self) -> String {
        let e = self.aggregate.ee_cm;
        let mjpe = self
            .aggregate
            .mjpe_mm
            .map_or("n/a".to_string(), |v| format!("{v:.3} mm"));
        format!(
            "aggregate: mjpe {mjpe}, ee head {:.3} cm, left hand {:.3} cm, right hand {:.3} cm over {} frames",
            e.head, e.left_hand, e.right_hand, self.aggregate.frames
        )
    }
}

pub fn write_report(report: &MetricsReport, path: impl AsRef<Path>) -> Result<(), EvalError> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, json + "\n").map_err(|e| EvalError::DiskWrite {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_report(path: impl AsRef<Path>) -> Result<MetricsReport, EvalError> {
    let path = path.as_ref();
    let err = |message: String| EvalError::Report {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| err(e.to_string()))
}

const EE_HEADERS: [&str; 3] = ["Head", "L. Hand", "R. Hand"];

/// Motions as rows; a Head / L. Hand / R. Hand column group per method.
pub fn render_table(methods: &[String], rows: &[TableRow]) -> String {
    let cell = 8;
    let label = rows
        .iter()
        .map(|r| r.motion.len())
        .max()
        .unwrap_or(0)
        .max(6);
    let group = 3 * cell + 2;
    let mut out = String::new();
    let _ = write!(out, "{:label$} ", "");
    for m in methods {
        let _ = write!(out, "| {m:^w$}", w = group - 1);
    }
    out.push_str("|\n");
    let _ = write!(out, "{:label$} ", "");
    for _ in methods {
        out.push_str("| ");
        for h in EE_HEADERS {
            let _ = write!(out, "{h:>cell$}");
        }
        out.push(' ');
    }
    out.push_str("|\n");
    let rule = label + 1 + methods.len() * (group + 1) + 1;
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{:label$} ", row.motion);
        for i in 0..methods.len() {
            out.push_str("| ");
            let values = row.methods.get(i).map(EeErrors::values);
            for v in 0..3 {
                match values {
                    Some(vals) => {
                        let _ = write!(out, "{:>cell$.1}", vals[v]);
                    }
                    None => {
                        let _ = write!(out, "{:>cell$}", "-");
                    }
                }
            }
            out.push(' ');
        }
        out.push_str("|\n");
    }
    out
}

/// End-effector errors of every motion in `report` (cm), one method group.
pub fn render_report_table(report: &MetricsReport) -> String {
    let rows: Vec<TableRow> = report
        .per_motion
        .iter()
        .map(|m| TableRow {
            motion: m.name.clone(),
            methods: vec![m.ee_cm],
        })
        .collect();
    let mut out = render_table(&["Measured".to_string()], &rows);
    if let Some(reference) = &report.reference {
        out.push('\n');
        out.push_str(&render_reference_table(reference));
    }
    out
}

pub fn render_reference_table(reference: &ReferenceConstants) -> String {
    render_table(&reference.table_methods, &reference.table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_table_layout() {
        let text = render_reference_table(&ReferenceConstants::default());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].contains("Ours") && lines[0].contains("IK-based"));
        assert!(lines[0].find("Ours") < lines[0].find("IK-based"));
        assert_eq!(lines[1].matches("Head").count(), 2);
        let open: Vec<&str> = lines[3].split_whitespace().filter(|t| *t != "|").collect();
        assert_eq!(
            open,
            ["Open", "10.7", "26.1", "17.8", "11.2", "24.2", "22.5"]
        );
        let wipe: Vec<&str> = lines[4].split_whitespace().filter(|t| *t != "|").collect();
        assert_eq!(
            wipe,
            ["Wipe", "3.8", "31.9", "16.2", "12.9", "32.2", "36.5"]
        );
    }

    #[test]
    fn empty_report_is_valid_json() {
        let r = MetricsReport::new(Vec::new(), 10.0, Vec::new());
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["per_motion"], serde_json::json!([]));
        assert!(v["aggregate"]["mjpe_mm"].is_null());
        assert_eq!(v["unit_scale_mm"], 10.0);
    }

    #[test]
    fn aggregate_is_frame_weighted() {
        let m = |frames, mjpe| MotionMetrics {
            name: "m".into(),
            frames,
            mjpe_mm: Some(mjpe),
            ee_cm: EeErrors::default(),
        };
        let a = Aggregate::from_motions(&[m(100, 1.0), m(300, 3.0)]);
        assert!((a.mjpe_mm.unwrap() - 2.5).abs() < 1e-12);
        assert!((a.mjpe_mm_motion_mean.unwrap() - 2.0).abs() < 1e-12);
    }
}
