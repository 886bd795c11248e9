//! Network case descriptions and the DC linearization.
//!
//! Case files are plain text:
//!
//! ```text
//! # comment
//! name = case2
//! base_mva = 100
//! [buses]
//! # id, nominal_load, is_slack
//! 1, 0.0, 1
//! 2, 1.0, 0
//! [branches]
//! # from_bus, to_bus, reactance, flow_limit
//! 1, 2, 0.1, 1.5
//! [generators]
//! # bus, p_min, p_max, cost_quadratic, cost_linear, cost_constant
//! 1, 0.0, 2.0, 1.0, 10.0, 0.0
//! ```
//!
//! Powers and impedances are per unit on `base_mva`. Branch flow is positive
//! in the `from_bus -> to_bus` direction; a positive nodal injection is net
//! generation.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type BusId = i64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub nominal_load: f64,
    pub is_slack: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub reactance: f64,
    pub flow_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: BusId,
    pub p_min: f64,
    pub p_max: f64,
    pub cost_quadratic: f64,
    pub cost_linear: f64,
    pub cost_constant: f64,
}

impl Generator {
    pub fn cost(&self, p: f64) -> f64 {
        self.cost_quadratic * p * p + self.cost_linear * p + self.cost_constant
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

/// Per-bus active demand in per unit, indexed in ascending bus-id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadVector(pub Vec<f64>);

impl LoadVector {
    pub fn zeros(n: usize) -> Self {
        LoadVector(vec![0.0; n])
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for LoadVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for LoadVector {
    fn from(v: Vec<f64>) -> Self {
        LoadVector(v)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Buses,
    Branches,
    Generators,
}

struct Record<'a> {
    line: usize,
    fields: Vec<&'a str>,
}

impl Record<'_> {
    fn expect_arity(&self, names: &[&str]) -> Result<()> {
        if self.fields.len() != names.len() {
            return Err(Error::Syntax {
                line: self.line,
                message: format!(
                    "expected {} fields ({}), found {}",
                    names.len(),
                    names.join(", "),
                    self.fields.len()
                ),
            });
        }
        Ok(())
    }

    fn float(&self, idx: usize, name: &str) -> Result<f64> {
        let raw = self.fields[idx];
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.field_error(idx, name, raw)),
        }
    }

    fn int(&self, idx: usize, name: &str) -> Result<i64> {
        let raw = self.fields[idx];
        raw.parse::<i64>().map_err(|_| self.field_error(idx, name, raw))
    }

    fn flag(&self, idx: usize, name: &str) -> Result<bool> {
        match self.fields[idx] {
            "0" => Ok(false),
            "1" => Ok(true),
            raw => Err(self.field_error(idx, name, raw)),
        }
    }

    fn field_error(&self, idx: usize, name: &str, raw: &str) -> Error {
        Error::Syntax {
            line: self.line,
            message: format!("field {} ({name}): invalid value '{raw}'", idx + 1),
        }
    }
}

const BUS_FIELDS: [&str; 3] = ["id", "nominal_load", "is_slack"];
const BRANCH_FIELDS: [&str; 4] = ["from_bus", "to_bus", "reactance", "flow_limit"];
const GEN_FIELDS: [&str; 6] = [
    "bus",
    "p_min",
    "p_max",
    "cost_quadratic",
    "cost_linear",
    "cost_constant",
];

/// Parse case-file text and validate it.
pub fn parse_case(text: &str) -> Result<NetworkCase> {
    let mut section = Section::Preamble;
    let mut name = String::new();
    let mut base_mva = None;
    let mut buses = Vec::new();
    let mut branches = Vec::new();
    let mut generators = Vec::new();
    let mut seen = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            section = match content {
                "[buses]" => Section::Buses,
                "[branches]" => Section::Branches,
                "[generators]" => Section::Generators,
                other => {
                    return Err(Error::Syntax {
                        line,
                        message: format!("unknown section {other}"),
                    })
                }
            };
            if !seen.insert(content.to_string()) {
                return Err(Error::Syntax {
                    line,
                    message: format!("duplicate section {content}"),
                });
            }
            continue;
        }
        if section == Section::Preamble {
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Syntax {
                line,
                message: format!("expected 'key = value' before the first section, found '{content}'"),
            })?;
            match key.trim() {
                "name" => name = value.trim().to_string(),
                "base_mva" => {
                    let v = value.trim();
                    base_mva = Some(v.parse::<f64>().map_err(|_| Error::Syntax {
                        line,
                        message: format!("base_mva: invalid value '{v}'"),
                    })?)
                }
                other => {
                    return Err(Error::Syntax {
                        line,
                        message: format!("unknown key '{other}'"),
                    })
                }
            }
            continue;
        }
        let rec = Record {
            line,
            fields: content.split(',').map(str::trim).collect(),
        };
        match section {
            Section::Buses => {
                rec.expect_arity(&BUS_FIELDS)?;
                buses.push(Bus {
                    id: rec.int(0, "id")?,
                    nominal_load: rec.float(1, "nominal_load")?,
                    is_slack: rec.flag(2, "is_slack")?,
                });
            }
            Section::Branches => {
                rec.expect_arity(&BRANCH_FIELDS)?;
                branches.push(Branch {
                    from_bus: rec.int(0, "from_bus")?,
                    to_bus: rec.int(1, "to_bus")?,
                    reactance: rec.float(2, "reactance")?,
                    flow_limit: rec.float(3, "flow_limit")?,
                });
            }
            Section::Generators => {
                rec.expect_arity(&GEN_FIELDS)?;
                generators.push(Generator {
                    bus: rec.int(0, "bus")?,
                    p_min: rec.float(1, "p_min")?,
                    p_max: rec.float(2, "p_max")?,
                    cost_quadratic: rec.float(3, "cost_quadratic")?,
                    cost_linear: rec.float(4, "cost_linear")?,
                    cost_constant: rec.float(5, "cost_constant")?,
                });
            }
            Section::Preamble => unreachable!(),
        }
    }

    let base_mva = base_mva.ok_or_else(|| Error::InvalidCase("missing base_mva".into()))?;
    let case = NetworkCase {
        name,
        base_mva,
        buses,
        branches,
        generators,
    };
    case.validate()?;
    Ok(case)
}

/// Read and parse a case file. An unnamed case takes the file stem as its name.
pub fn read_case(path: impl AsRef<Path>) -> Result<NetworkCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut case = parse_case(&text)?;
    if case.name.is_empty() {
        if let Some(stem) = path.file_stem() {
            case.name = stem.to_string_lossy().into_owned();
        }
    }
    Ok(case)
}

impl NetworkCase {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidCase(msg));
        if !(self.base_mva > 0.0) {
            return bad(format!("base_mva must be positive, got {}", self.base_mva));
        }
        if self.buses.is_empty() {
            return bad("case has no buses".into());
        }
        let mut ids = HashSet::new();
        for bus in &self.buses {
            if !ids.insert(bus.id) {
                return bad(format!("duplicate bus id {}", bus.id));
            }
            if !(bus.nominal_load >= 0.0) {
                return bad(format!("bus {}: negative nominal load {}", bus.id, bus.nominal_load));
            }
        }
        let slack = self.buses.iter().filter(|b| b.is_slack).count();
        if slack != 1 {
            return bad(format!("expected exactly one slack bus, found {slack}"));
        }
        for (k, br) in self.branches.iter().enumerate() {
            let k = k + 1;
            for end in [br.from_bus, br.to_bus] {
                if !ids.contains(&end) {
                    return bad(format!("branch {k} references nonexistent bus {end}"));
                }
            }
            if br.from_bus == br.to_bus {
                return bad(format!("branch {k} connects bus {} to itself", br.from_bus));
            }
            if !(br.reactance > 0.0) {
                return bad(format!("branch {k}: non-positive reactance {}", br.reactance));
            }
            if !(br.flow_limit > 0.0) {
                return bad(format!("branch {k}: non-positive flow limit {}", br.flow_limit));
            }
        }
        for (k, g) in self.generators.iter().enumerate() {
            let k = k + 1;
            if !ids.contains(&g.bus) {
                return bad(format!("generator {k} references nonexistent bus {}", g.bus));
            }
            if !(g.p_min >= 0.0 && g.p_min <= g.p_max) {
                return bad(format!(
                    "generator {k}: need 0 <= p_min <= p_max, got [{}, {}]",
                    g.p_min, g.p_max
                ));
            }
            if !(g.cost_quadratic >= 0.0) {
                return bad(format!("generator {k}: negative quadratic cost {}", g.cost_quadratic));
            }
        }
        Ok(())
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Bus ids in ascending order; position `i` is load-vector coordinate `i`.
    pub fn sorted_bus_ids(&self) -> Vec<BusId> {
        let mut ids: Vec<_> = self.buses.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        ids
    }

    /// Serialize back to case-file text. Floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_case_string(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for NetworkCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.name.is_empty() {
            writeln!(f, "name = {}", self.name)?;
        }
        writeln!(f, "base_mva = {:?}", self.base_mva)?;
        writeln!(f, "[buses]")?;
        writeln!(f, "# {}", BUS_FIELDS.join(", "))?;
        for b in &self.buses {
            writeln!(f, "{}, {:?}, {}", b.id, b.nominal_load, u8::from(b.is_slack))?;
        }
        writeln!(f, "[branches]")?;
        writeln!(f, "# {}", BRANCH_FIELDS.join(", "))?;
        for b in &self.branches {
            writeln!(f, "{}, {}, {:?}, {:?}", b.from_bus, b.to_bus, b.reactance, b.flow_limit)?;
        }
        writeln!(f, "[generators]")?;
        writeln!(f, "# {}", GEN_FIELDS.join(", "))?;
        for g in &self.generators {
            writeln!(
                f,
                "{}, {:?}, {:?}, {:?}, {:?}, {:?}",
                g.bus, g.p_min, g.p_max, g.cost_quadratic, g.cost_linear, g.cost_constant
            )?;
        }
        Ok(())
    }
}

/// Nominal demand per bus in ascending bus-id order.
pub fn nominal_load_vector(case: &NetworkCase) -> LoadVector {
    let mut buses: Vec<&Bus> = case.buses.iter().collect();
    buses.sort_unstable_by_key(|b| b.id);
    LoadVector(buses.iter().map(|b| b.nominal_load).collect())
}

/// Constant data of the DC-linearized OPF.
#[derive(Debug, Clone, PartialEq)]
pub struct DcModel {
    pub case_name: String,
    pub bus_ids: Vec<BusId>,
    pub slack: usize,
    /// Branch × bus sensitivities of branch flows to nodal injections,
    /// referenced to the slack bus (whose column is zero).
    pub injection_shift: DMatrix<f64>,
    /// Bus × generator 0/1 map.
    pub gen_incidence: DMatrix<f64>,
    pub branch_ends: Vec<(usize, usize)>,
    pub flow_limit: Vec<f64>,
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    pub cost_quadratic: Vec<f64>,
    pub cost_linear: Vec<f64>,
    pub cost_constant: Vec<f64>,
}

impl DcModel {
    pub fn n_buses(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branch_ends.len()
    }

    pub fn n_generators(&self) -> usize {
        self.p_min.len()
    }

    /// Branch flows for a vector of net nodal injections.
    pub fn branch_flows(&self, injection: &[f64]) -> Vec<f64> {
        let p = nalgebra::DVector::from_column_slice(injection);
        (&self.injection_shift * p).iter().copied().collect()
    }

    /// Total generation cost of a dispatch.
    pub fn dispatch_cost(&self, dispatch: &[f64]) -> f64 {
        dispatch
            .iter()
            .enumerate()
            .map(|(g, &p)| {
                self.cost_quadratic[g] * p * p + self.cost_linear[g] * p + self.cost_constant[g]
            })
            .sum()
    }

    /// Net injection per bus: generation minus load.
    pub fn net_injection(&self, dispatch: &[f64], load: &[f64]) -> Vec<f64> {
        let g = nalgebra::DVector::from_column_slice(dispatch);
        let inj = &self.gen_incidence * g;
        inj.iter().zip(load).map(|(p, l)| p - l).collect()
    }
}

/// Build the shift-factor model from the reduced nodal susceptance matrix.
pub fn build_dc_model(case: &NetworkCase) -> Result<DcModel> {
    case.validate()?;
    let bus_ids = case.sorted_bus_ids();
    let index: HashMap<BusId, usize> = bus_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let n = bus_ids.len();
    let slack = index[&case.buses.iter().find(|b| b.is_slack).expect("validated").id];

    let branch_ends: Vec<(usize, usize)> = case
        .branches
        .iter()
        .map(|b| (index[&b.from_bus], index[&b.to_bus]))
        .collect();

    let mut adjacency = vec![Vec::new(); n];
    for &(f, t) in &branch_ends {
        adjacency[f].push(t);
        adjacency[t].push(f);
    }
    let mut reached = vec![false; n];
    reached[slack] = true;
    let mut queue = VecDeque::from([slack]);
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if !reached[v] {
                reached[v] = true;
                queue.push_back(v);
            }
        }
    }
    if let Some(i) = reached.iter().position(|r| !r) {
        return Err(Error::Disconnected(bus_ids[i]));
    }

    // Reduced coordinates skip the slack bus.
    let reduced = |i: usize| -> Option<usize> {
        match i.cmp(&slack) {
            std::cmp::Ordering::Less => Some(i),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(i - 1),
        }
    };
    let m = n - 1;
    let mut b_red = DMatrix::<f64>::zeros(m, m);
    for (k, &(f, t)) in branch_ends.iter().enumerate() {
        let b = 1.0 / case.branches[k].reactance;
        let (rf, rt) = (reduced(f), reduced(t));
        if let Some(i) = rf {
            b_red[(i, i)] += b;
        }
        if let Some(j) = rt {
            b_red[(j, j)] += b;
        }
        if let (Some(i), Some(j)) = (rf, rt) {
            b_red[(i, j)] -= b;
            b_red[(j, i)] -= b;
        }
    }
    let x_red = if m == 0 {
        DMatrix::zeros(0, 0)
    } else {
        let chol = b_red
            .cholesky()
            .ok_or_else(|| Error::Singular("reduced susceptance matrix is not positive definite".into()))?;
        chol.inverse()
    };

    let mut shift = DMatrix::<f64>::zeros(branch_ends.len(), n);
    for (k, &(f, t)) in branch_ends.iter().enumerate() {
        let b = 1.0 / case.branches[k].reactance;
        for bus in 0..n {
            let Some(c) = reduced(bus) else { continue };
            let theta_f = reduced(f).map_or(0.0, |r| x_red[(r, c)]);
            let theta_t = reduced(t).map_or(0.0, |r| x_red[(r, c)]);
            shift[(k, bus)] = b * (theta_f - theta_t);
        }
    }

    let n_g = case.generators.len();
    let mut gen_incidence = DMatrix::<f64>::zeros(n, n_g);
    for (g, gen) in case.generators.iter().enumerate() {
        gen_incidence[(index[&gen.bus], g)] = 1.0;
    }
    let gens = &case.generators;
    Ok(DcModel {
        case_name: case.name.clone(),
        bus_ids,
        slack,
        injection_shift: shift,
        gen_incidence,
        branch_ends,
        flow_limit: case.branches.iter().map(|b| b.flow_limit).collect(),
        p_min: gens.iter().map(|g| g.p_min).collect(),
        p_max: gens.iter().map(|g| g.p_max).collect(),
        cost_quadratic: gens.iter().map(|g| g.cost_quadratic).collect(),
        cost_linear: gens.iter().map(|g| g.cost_linear).collect(),
        cost_constant: gens.iter().map(|g| g.cost_constant).collect(),
    })
}
