//! Feeder description and the MATPOWER-style case parser.
//!
//! Internal indexing puts the slack bus at position 0; the remaining buses
//! keep their file order and occupy positions 1..=n. Non-slack quantities
//! (voltages, injections, measurement rows) use the shifted index 0..n.

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// Identifier from the case file.
    pub id: usize,
    pub kind: BusKind,
    /// Consumed power `P + jQ` in per-unit.
    pub load: Complex64,
    /// Shunt admittance `G + jB` in per-unit at 1 pu voltage.
    pub shunt: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Internal bus positions.
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance.
    pub b: f64,
    /// Off-nominal tap ratio on the `from` side (1 for lines).
    pub tap: f64,
}

impl Branch {
    pub fn series_admittance(&self) -> Complex64 {
        Complex64::new(self.r, self.x).inv()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub name: String,
    pub base_mva: f64,
    /// Slack first, see module docs.
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub v0: Complex64,
}

impl NetworkCase {
    /// Builds a case from buses in any order; the slack bus is moved to the
    /// front and branch endpoints (given as bus ids) are remapped.
    pub fn new(
        name: impl Into<String>,
        base_mva: f64,
        buses: Vec<Bus>,
        branches: Vec<(usize, usize, f64, f64, f64, f64)>,
        v0: Complex64,
    ) -> Result<Self> {
        let slacks: Vec<usize> = buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind == BusKind::Slack)
            .map(|(i, _)| i)
            .collect();
        if slacks.len() != 1 {
            return Err(CoreError::Validation(format!(
                "expected exactly one slack bus, found {}",
                slacks.len()
            )));
        }
        let mut ordered = Vec::with_capacity(buses.len());
        ordered.push(buses[slacks[0]].clone());
        ordered.extend(buses.iter().filter(|b| b.kind != BusKind::Slack).cloned());

        let pos = |id: usize| ordered.iter().position(|b| b.id == id);
        let mut mapped = Vec::with_capacity(branches.len());
        for (f, t, r, x, b, tap) in branches {
            let (Some(from), Some(to)) = (pos(f), pos(t)) else {
                return Err(CoreError::Validation(format!("branch {f}-{t} references an unknown bus")));
            };
            mapped.push(Branch {
                from,
                to,
                r,
                x,
                b,
                tap: if tap == 0.0 { 1.0 } else { tap },
            });
        }
        let case = Self {
            name: name.into(),
            base_mva,
            buses: ordered,
            branches: mapped,
            v0,
        };
        case.validate()?;
        Ok(case)
    }

    pub fn validate(&self) -> Result<()> {
        let slack = self.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slack != 1 || self.buses.first().map(|b| b.kind) != Some(BusKind::Slack) {
            return Err(CoreError::Validation(format!(
                "expected exactly one slack bus stored first, found {slack}"
            )));
        }
        if self.buses.len() < 2 {
            return Err(CoreError::Validation("case needs at least one load bus".into()));
        }
        for (k, br) in self.branches.iter().enumerate() {
            if br.r.hypot(br.x) == 0.0 {
                return Err(CoreError::Validation(format!("branch {k} has zero impedance")));
            }
            if br.from >= self.buses.len() || br.to >= self.buses.len() || br.from == br.to {
                return Err(CoreError::Validation(format!("branch {k} has invalid endpoints")));
            }
        }
        let reached = self.reachable_from_slack();
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err(CoreError::Validation(format!(
                "bus {} is not connected to the slack bus",
                self.buses[i].id
            )));
        }
        Ok(())
    }

    fn reachable_from_slack(&self) -> Vec<bool> {
        let adj = self.bus_adjacency();
        let mut seen = vec![false; self.buses.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Neighbour lists over all internal bus positions.
    pub fn bus_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for br in &self.branches {
            adj[br.from].push(br.to);
            adj[br.to].push(br.from);
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Neighbour lists restricted to non-slack buses, in non-slack indexing.
    pub fn load_adjacency(&self) -> Vec<Vec<usize>> {
        self.bus_adjacency()
            .into_iter()
            .skip(1)
            .map(|a| a.into_iter().filter(|&j| j > 0).map(|j| j - 1).collect())
            .collect()
    }

    /// Number of non-slack buses.
    pub fn n(&self) -> usize {
        self.buses.len() - 1
    }

    /// Net injections `s = −load` of the non-slack buses.
    pub fn injections(&self) -> Vec<Complex64> {
        self.buses[1..].iter().map(|b| -b.load).collect()
    }

    /// Copy with every load multiplied by `factor`.
    pub fn scaled_loads(&self, factor: f64) -> Self {
        let mut c = self.clone();
        for b in &mut c.buses {
            b.load *= factor;
        }
        c
    }

    pub fn total_load(&self) -> Complex64 {
        self.buses.iter().map(|b| b.load).sum()
    }
}

/// Parses MATPOWER-style case text (`mpc.baseMVA`, `mpc.bus`, `mpc.branch`
/// and optionally `mpc.gen`). Loads and shunts are converted to per-unit on
/// `baseMVA`; branch data are taken to be per-unit already. Unused columns
/// are ignored.
pub fn parse_case(text: &str) -> Result<NetworkCase> {
    parse_case_named(text, "case")
}

pub fn parse_case_named(text: &str, name: &str) -> Result<NetworkCase> {
    let mut base_mva = None;
    let mut bus_rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut branch_rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut gen_rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut section: Option<&'static str> = None;

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(sec) = section {
            let (body, closes) = match line.find(']') {
                Some(p) => (&line[..p], true),
                None => (line, false),
            };
            for chunk in body.split(';') {
                let vals = parse_numbers(chunk, line_no)?;
                if vals.is_empty() {
                    continue;
                }
                let row = (line_no, vals);
                match sec {
                    "bus" => bus_rows.push(row),
                    "branch" => branch_rows.push(row),
                    _ => gen_rows.push(row),
                }
            }
            if closes {
                section = None;
            }
            continue;
        }
        let compact: String = line.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(rest) = compact.strip_prefix("mpc.baseMVA=") {
            let v = rest.trim_end_matches(';');
            base_mva = Some(v.parse::<f64>().map_err(|_| CoreError::Parse {
                line: line_no,
                msg: format!("bad baseMVA value '{v}'"),
            })?);
            continue;
        }
        for (key, sec) in [("mpc.bus=[", "bus"), ("mpc.branch=[", "branch"), ("mpc.gen=[", "gen")] {
            if compact.starts_with(key) {
                let after = &line[line.find('[').unwrap_or(0) + 1..];
                let (body, closes) = match after.find(']') {
                    Some(p) => (&after[..p], true),
                    None => (after, false),
                };
                for chunk in body.split(';') {
                    let vals = parse_numbers(chunk, line_no)?;
                    if !vals.is_empty() {
                        let row = (line_no, vals);
                        match sec {
                            "bus" => bus_rows.push(row),
                            "branch" => branch_rows.push(row),
                            _ => gen_rows.push(row),
                        }
                    }
                }
                if !closes {
                    section = Some(sec);
                }
            }
        }
    }
    if section.is_some() {
        return Err(CoreError::Parse {
            line: text.lines().count(),
            msg: "unterminated matrix".into(),
        });
    }
    let base_mva = base_mva.ok_or(CoreError::Parse {
        line: 0,
        msg: "missing mpc.baseMVA".into(),
    })?;
    if bus_rows.is_empty() {
        return Err(CoreError::Parse {
            line: 0,
            msg: "missing mpc.bus table".into(),
        });
    }

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut slack_vm = 1.0;
    let mut slack_va = 0.0;
    let mut slack_id = None;
    for (line, row) in &bus_rows {
        need(row, 9, *line, "bus")?;
        let id = row[0] as usize;
        let kind = match row[1] as i64 {
            3 => BusKind::Slack,
            1 => BusKind::Pq,
            t => {
                return Err(CoreError::Parse {
                    line: *line,
                    msg: format!("unsupported bus type {t} (only PQ and slack buses are modelled)"),
                })
            }
        };
        if kind == BusKind::Slack {
            slack_vm = row[7];
            slack_va = row[8];
            slack_id = Some(id);
        }
        buses.push(Bus {
            id,
            kind,
            load: Complex64::new(row[2], row[3]) / base_mva,
            shunt: Complex64::new(row[4], row[5]) / base_mva,
        });
    }
    // a generator setpoint at the slack overrides the bus table magnitude
    for (line, row) in &gen_rows {
        need(row, 6, *line, "gen")?;
        if Some(row[0] as usize) == slack_id && row.get(7).is_none_or(|&s| s > 0.0) {
            slack_vm = row[5];
        }
    }
    let mut branches = Vec::with_capacity(branch_rows.len());
    for (line, row) in &branch_rows {
        need(row, 4, *line, "branch")?;
        if row.get(10).is_some_and(|&s| s == 0.0) {
            continue;
        }
        if row.get(9).is_some_and(|&a| a != 0.0) {
            return Err(CoreError::Parse {
                line: *line,
                msg: "phase-shifting transformers are not supported".into(),
            });
        }
        let b = row.get(4).copied().unwrap_or(0.0);
        let tap = row.get(8).copied().unwrap_or(0.0);
        branches.push((row[0] as usize, row[1] as usize, row[2], row[3], b, tap));
    }
    let v0 = Complex64::from_polar(slack_vm, slack_va.to_radians());
    NetworkCase::new(name, base_mva, buses, branches, v0)
}

fn parse_numbers(chunk: &str, line: usize) -> Result<Vec<f64>> {
    chunk
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>().map_err(|_| CoreError::Parse {
                line,
                msg: format!("not a number: '{t}'"),
            })
        })
        .collect()
}

fn need(row: &[f64], cols: usize, line: usize, table: &str) -> Result<()> {
    if row.len() < cols {
        return Err(CoreError::Parse {
            line,
            msg: format!("{table} row has {} columns, expected at least {cols}", row.len()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "
mpc.baseMVA = 100;
mpc.bus = [
  2 1 10 5 0 0 1 1 0 12 1 1.1 0.9;
  1 3 0 0 0 0 1 1.02 0 12 1 1 1;
];
mpc.branch = [1 2 0.01 0.02 0 0 0 0 0 0 1 -360 360];
";

    #[test]
    fn slack_moved_first_and_units_converted() {
        let c = parse_case(TINY).unwrap();
        assert_eq!(c.buses[0].id, 1);
        assert_eq!(c.n(), 1);
        assert!((c.buses[1].load - Complex64::new(0.1, 0.05)).norm() < 1e-15);
        assert!((c.v0 - Complex64::new(1.02, 0.0)).norm() < 1e-15);
        assert_eq!((c.branches[0].from, c.branches[0].to), (0, 1));
        assert_eq!(c.branches[0].tap, 1.0);
    }

    #[test]
    fn two_slacks_rejected() {
        let text = TINY.replace("2 1 10 5", "2 3 10 5");
        assert!(matches!(parse_case(&text), Err(CoreError::Validation(_))));
    }

    #[test]
    fn disconnected_rejected() {
        let text = TINY.replace("0 0 1 -360 360", "0 0 0 -360 360");
        assert!(matches!(parse_case(&text), Err(CoreError::Validation(_))));
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = TINY.replace("0.01 0.02", "0.01 x");
        match parse_case(&text) {
            Err(CoreError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }
}
