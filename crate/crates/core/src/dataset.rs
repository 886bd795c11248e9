//! Labeled learning sets `{(l, δ(l), C*(l))}`: generation, splitting and
//! CSV persistence.
//!
//! A dataset file is a CSV with header `l_1,...,l_nb,feasible,cost,solve_time`;
//! `feasible` is `0` or `1` and `cost` is empty for infeasible rows. Floats are
//! written in their shortest round-trip form. A sidecar `<basename>.meta`
//! holds `key=value` lines with the case name and sampler settings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcase::DcModel;
use crate::opf::solve_opf;
use crate::rng::{rng_from_seed, RNG_ALGORITHM};
use crate::sampler::{hit_and_run, Polytope, SamplerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub load: Vec<f64>,
    pub feasible: bool,
    /// Present iff `feasible`.
    pub cost: Option<f64>,
    pub solve_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub case_name: String,
    pub sampler: Option<SamplerConfig>,
    /// Load dimension (bus count); kept explicitly so empty datasets have one.
    pub dim: usize,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(case_name: impl Into<String>, dim: usize, samples: Vec<LabeledSample>) -> Result<Self> {
        let data = Dataset {
            case_name: case_name.into(),
            sampler: None,
            dim,
            samples,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.load.len() != self.dim {
                return Err(Error::Dimension {
                    expected: self.dim,
                    got: s.load.len(),
                }
                .at_sample(i));
            }
            if s.feasible != s.cost.is_some() {
                return Err(Error::precondition("cost must be present iff feasible").at_sample(i));
            }
        }
        Ok(())
    }

    pub fn feasible_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.feasible).count() as f64 / self.n() as f64
    }

    pub fn feasible(&self) -> impl Iterator<Item = &LabeledSample> {
        self.samples.iter().filter(|s| s.feasible)
    }

    pub fn mean_solve_time(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.solve_time).sum::<f64>() / self.n() as f64
    }

    /// A dataset with the same metadata and the given rows.
    pub fn with_samples(&self, samples: Vec<LabeledSample>) -> Dataset {
        Dataset {
            case_name: self.case_name.clone(),
            sampler: self.sampler.clone(),
            dim: self.dim,
            samples,
        }
    }
}

/// Sample `n` loads with Hit&Run and label each with an exact OPF solve.
///
/// The chain itself is sequential; labeling runs on a pool of `workers`
/// threads and results are merged by sample index, so the output depends
/// only on the seed and `n`.
pub fn generate_dataset(
    model: &DcModel,
    poly: &Polytope,
    config: &SamplerConfig,
    n: usize,
    workers: usize,
) -> Result<Dataset> {
    use rayon::prelude::*;

    if n == 0 {
        return Err(Error::precondition("dataset size must be at least 1"));
    }
    if workers == 0 {
        return Err(Error::precondition("worker count must be at least 1"));
    }
    if poly.full_dim != model.n_buses() {
        return Err(Error::Dimension {
            expected: model.n_buses(),
            got: poly.full_dim,
        });
    }
    config.validate()?;
    let loads = hit_and_run(poly, config, n)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Format(format!("cannot start worker pool: {e}")))?;
    let samples = pool.install(|| {
        loads
            .into_par_iter()
            .enumerate()
            .map(|(i, load)| {
                let out = solve_opf(model, &load).map_err(|e| e.at_sample(i))?;
                Ok(LabeledSample {
                    load: load.into_inner(),
                    feasible: out.feasible,
                    cost: out.cost,
                    solve_time: out.solve_time,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(Dataset {
        case_name: model.case_name.clone(),
        sampler: Some(config.clone()),
        dim: model.n_buses(),
        samples,
    })
}

/// Random partition into `round(train_fraction·n)` training rows and the rest.
/// Rows keep their original relative order within each part.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::precondition(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = data.n();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::precondition(format!(
            "splitting {n} samples at {train_fraction} leaves an empty partition"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::with_capacity(n - n_train));
    for (i, s) in data.samples.iter().enumerate() {
        if in_train[i] {
            train.push(s.clone());
        } else {
            test.push(s.clone());
        }
    }
    Ok((data.with_samples(train), data.with_samples(test)))
}

pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

fn header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=dim).map(|i| format!("l_{i}")).collect();
    h.extend(["feasible", "cost", "solve_time"].map(String::from));
    h
}

/// Write the dataset CSV and its `.meta` sidecar.
pub fn save(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: std::io::Error| Error::io(path, e);
    let csv_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header(data.dim)).map_err(csv_err)?;
    let mut row = Vec::with_capacity(data.dim + 3);
    for s in &data.samples {
        row.clear();
        row.extend(s.load.iter().map(|v| format!("{v:?}")));
        row.push(if s.feasible { "1" } else { "0" }.to_string());
        row.push(s.cost.map(|c| format!("{c:?}")).unwrap_or_default());
        row.push(format!("{:?}", s.solve_time));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;

    let meta = metadata_text(data);
    let mp = meta_path(path);
    std::fs::write(&mp, meta).map_err(|e| Error::io(&mp, e))
}

fn metadata_text(data: &Dataset) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "case_name={}", data.case_name);
    let _ = writeln!(m, "n={}", data.n());
    let _ = writeln!(m, "dim={}", data.dim);
    if let Some(c) = &data.sampler {
        let _ = writeln!(m, "rng={RNG_ALGORITHM}");
        let _ = writeln!(m, "seed={}", c.seed);
        let _ = writeln!(m, "burn_in={}", c.burn_in);
        let _ = writeln!(m, "thinning={}", c.thinning);
        let _ = writeln!(m, "alpha_min={:?}", c.alpha_min);
        let _ = writeln!(m, "alpha_max={:?}", c.alpha_max);
    }
    m
}

fn parse_metadata(text: &str) -> Result<(String, Option<SamplerConfig>)> {
    let mut case_name = String::new();
    let mut cfg = SamplerConfig::default();
    let mut has_sampler = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Syntax {
            line: i + 1,
            message: format!("expected key=value, found '{line}'"),
        })?;
        let bad = || Error::Syntax {
            line: i + 1,
            message: format!("invalid value for {k}: '{v}'"),
        };
        match k {
            "case_name" => case_name = v.to_string(),
            "seed" => {
                cfg.seed = v.parse().map_err(|_| bad())?;
                has_sampler = true;
            }
            "burn_in" => cfg.burn_in = v.parse().map_err(|_| bad())?,
            "thinning" => cfg.thinning = v.parse().map_err(|_| bad())?,
            "alpha_min" => cfg.alpha_min = v.parse().map_err(|_| bad())?,
            "alpha_max" => cfg.alpha_max = v.parse().map_err(|_| bad())?,
            _ => {}
        }
    }
    Ok((case_name, has_sampler.then_some(cfg)))
}

/// Read a dataset CSV (and its `.meta` sidecar when present).
pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let head = r.headers().map_err(csv_err)?.clone();
    let cols = head.len();
    if cols < 3 {
        return Err(Error::Syntax {
            line: 1,
            message: "header needs load columns followed by feasible,cost,solve_time".into(),
        });
    }
    let dim = cols - 3;
    let expected = header(dim);
    if head.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Syntax {
            line: 1,
            message: format!("expected header '{}'", expected.join(",")),
        });
    }

    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let syntax = |message: String| Error::Syntax { line, message };
        if rec.len() != cols {
            return Err(syntax(format!("row has {} fields, expected {cols}", rec.len())));
        }
        let float = |j: usize| -> Result<f64> {
            rec[j]
                .parse::<f64>()
                .map_err(|_| syntax(format!("column {}: invalid number '{}'", expected[j], &rec[j])))
        };
        let load = (0..dim).map(float).collect::<Result<Vec<_>>>()?;
        let feasible = match &rec[dim] {
            "0" => false,
            "1" => true,
            other => return Err(syntax(format!("feasible must be 0 or 1, got '{other}'"))),
        };
        let cost = if rec[dim + 1].is_empty() {
            None
        } else {
            Some(float(dim + 1)?)
        };
        if cost.is_some() != feasible {
            return Err(syntax("cost must be present iff feasible".into()));
        }
        samples.push(LabeledSample {
            load,
            feasible,
            cost,
            solve_time: float(dim + 2)?,
        });
    }

    let mp = meta_path(path);
    let (case_name, sampler) = match std::fs::read_to_string(&mp) {
        Ok(text) => parse_metadata(&text)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => (String::new(), None),
        Err(e) => return Err(Error::io(&mp, e)),
    };
    Ok(Dataset {
        case_name,
        sampler,
        dim,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::netcase::{build_dc_model, nominal_load_vector, parse_case};
    use crate::sampler::box_polytope;
    use proptest::prelude::*;

    fn toy(n: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| LabeledSample {
                load: vec![i as f64, 0.1 * i as f64],
                feasible: i % 3 != 0,
                cost: (i % 3 != 0).then(|| 1.0 / (i as f64 + 1.0)),
                solve_time: 1e-4,
            })
            .collect();
        Dataset::new("toy", 2, samples).unwrap()
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let d = toy(10);
        let (train, test) = split(&d, 0.8, 1).unwrap();
        assert_eq!((train.n(), test.n()), (8, 2));
        let mut all: Vec<f64> = train.samples.iter().chain(&test.samples).map(|s| s.load[0]).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
        let (train2, _) = split(&d, 0.8, 1).unwrap();
        assert_eq!(train, train2);
        let (train3, _) = split(&d, 0.8, 2).unwrap();
        assert_ne!(train, train3);
    }

    #[test]
    fn table_one_split() {
        let d = Dataset::new(
            "big",
            1,
            (0..20_000)
                .map(|i| LabeledSample { load: vec![i as f64], feasible: false, cost: None, solve_time: 0.0 })
                .collect(),
        )
        .unwrap();
        let (train, test) = split(&d, 0.8, 0).unwrap();
        assert_eq!((train.n(), test.n()), (16_000, 4_000));
    }

    #[test]
    fn split_rejects_empty_partitions() {
        assert!(split(&toy(2), 0.1, 0).is_err());
        assert!(split(&toy(10), 1.0, 0).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut d = toy(7);
        d.sampler = Some(SamplerConfig { seed: u64::MAX, ..Default::default() });
        save(&d, &path).unwrap();
        assert_eq!(load(&path).unwrap(), d);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("l_1,l_2,feasible,cost,solve_time\n"));
        assert!(text.contains(",0,,"), "infeasible rows carry an empty cost");
        let meta = std::fs::read_to_string(meta_path(&path)).unwrap();
        assert!(meta.contains("rng=ChaCha8"));
    }

    #[test]
    fn wrong_arity_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "l_1,feasible,cost,solve_time\n1.0,1,2.0,0.1\n1.0,1,2.0\n").unwrap();
        match load(&path).unwrap_err() {
            Error::Syntax { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "l_1,l_2,l_3,feasible,cost,solve_time\n").unwrap();
        let d = load(&path).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.dim, 3);
    }

    #[test]
    fn generated_labels_match_direct_solves() {
        let case = parse_case(bundled::CASE2).unwrap();
        let model = build_dc_model(&case).unwrap();
        let poly = box_polytope(&nominal_load_vector(&case), 0.2, 2.0).unwrap();
        let cfg = SamplerConfig { seed: 5, ..Default::default() };
        let d = generate_dataset(&model, &poly, &cfg, 100, 2).unwrap();
        assert_eq!(d.n(), 100);
        let mut seen = [false, false];
        for s in &d.samples {
            let direct = solve_opf(&model, &s.load).unwrap();
            assert_eq!(direct.feasible, s.feasible);
            // Feasible iff the remote load fits under the 1.5 pu line rating.
            assert_eq!(s.feasible, s.load[1] <= 1.5);
            if let (Some(a), Some(b)) = (direct.cost, s.cost) {
                assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
            }
            seen[usize::from(s.feasible)] = true;
        }
        assert!(seen[0] && seen[1]);
        let single = generate_dataset(&model, &poly, &cfg, 1, 1).unwrap();
        assert_eq!(single.n(), 1);
        assert!(generate_dataset(&model, &poly, &cfg, 0, 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn csv_round_trip_is_bit_exact(
            rows in prop::collection::vec(
                (prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 3),
                 prop::option::of(any::<f64>().prop_filter("finite", |v| v.is_finite())),
                 0.0f64..1.0),
                0..20)
        ) {
            let samples = rows.into_iter().map(|(load, cost, t)| LabeledSample {
                load, feasible: cost.is_some(), cost, solve_time: t,
            }).collect();
            let d = Dataset::new("p", 3, samples).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.csv");
            save(&d, &path).unwrap();
            prop_assert_eq!(load(&path).unwrap(), d);
        }
    }
}
