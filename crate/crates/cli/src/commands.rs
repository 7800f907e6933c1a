use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use manybell::analyze::{find_nc, ingest, ViolationCriterion};
use manybell::binning::BinningStrategy;
use manybell::io::{write_csv_with_comments, write_jsonl, EventFormat};
use manybell::optimize::{
    binning_comparison, max_chsh, parity_vc_approx, scan_critical_curve, violation_ratio,
    werner_chsh, SearchMode, VcFit,
};
use manybell::pairstats::{settings_from_beta, CorrelatorTable};
use manybell::report::sig6;
use manybell::simulate::{simulate, DetectorModel, EventStream, SimulationRecipe};

use crate::output::{destination, emit, Provenance};
use crate::{
    AnalyzeArgs, Command, CompareArgs, CriterionArg, Format, MaxSArgs, OutputArgs, RatioArgs,
    ScanVcArgs, SimulateArgs,
};

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::ScanVc(a) => scan_vc(a),
        Command::MaxS(a) => max_s(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Analyze(a) => analyze(a),
        Command::Compare(a) => compare(a),
        Command::Ratio(a) => ratio(a),
    }
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// Writes either `csv_body` under the provenance comments or a JSON
/// document holding `result`.
fn finish<C: Serialize, R: Serialize>(
    name: &'static str,
    config: &C,
    output: &OutputArgs,
    result: &R,
    csv_body: impl FnOnce() -> String,
) -> Result<()> {
    let prov = Provenance::new(name, config);
    let dest = destination(&output.out, &format!("{name}.{}", ext(output.format)))?;
    let text = match output.format {
        Format::Csv => prov.csv_comments()? + &csv_body(),
        Format::Json => prov.json_document(result)?,
    };
    emit(dest.as_deref(), &text)
}

#[derive(Serialize)]
struct ScanRow {
    n: usize,
    v_c: f64,
    v_fit: Option<f64>,
    /// Majority: the literature two-term law; parity: first-order formula.
    v_reference: f64,
}

fn scan_vc(a: &ScanVcArgs) -> Result<()> {
    let strategy = a.binning.strategy();
    let curve = scan_critical_curve(&a.n, strategy, a.mode.mode())?;
    let reference = |n: usize| -> Result<f64> {
        Ok(match strategy {
            BinningStrategy::Parity => parity_vc_approx(n)?,
            BinningStrategy::Majority(_) => VcFit::majority_reference().predict(n),
        })
    };
    let rows = curve
        .points
        .iter()
        .map(|&(n, v_c)| {
            Ok(ScanRow {
                n,
                v_c,
                v_fit: curve.fit.map(|f| f.predict(n)),
                v_reference: reference(n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    #[derive(Serialize)]
    struct Out<'a> {
        curve: &'a manybell::optimize::CriticalCurve,
        rows: &'a [ScanRow],
    }
    finish(
        "scan-vc",
        a,
        &a.output,
        &Out {
            curve: &curve,
            rows: &rows,
        },
        || {
            let mut s = String::new();
            if let Some(f) = curve.fit {
                s += &format!(
                    "# fit v_c = 1 - c1/n + c2/n^2: c1={} c2={} residual={}\n",
                    sig6(f.c1),
                    sig6(f.c2),
                    sig6(f.residual_norm)
                );
            }
            if !curve.monotonicity_violations.is_empty() {
                s += &format!(
                    "# v_c decreases at n = {:?}\n",
                    curve.monotonicity_violations
                );
            }
            s += "n,v_c,strategy,v_fit,v_reference\n";
            for r in &rows {
                s += &format!(
                    "{},{},{},{},{}\n",
                    r.n,
                    sig6(r.v_c),
                    strategy,
                    manybell::report::sig6_opt(r.v_fit),
                    sig6(r.v_reference)
                );
            }
            s
        },
    )
}

fn max_s(a: &MaxSArgs) -> Result<()> {
    let strategy = a.binning.strategy();
    let betas = a.beta.expand(a.steps as usize);
    let grid: Vec<(usize, f64)> =
        a.n.iter()
            .flat_map(|&n| betas.iter().map(move |&b| (n, b)))
            .collect();
    let values = grid
        .par_iter()
        .map(|&(n, beta)| Ok(werner_chsh(&settings_from_beta(beta)?, a.v, n, strategy)?))
        .collect::<Result<Vec<f64>>>()?;
    let optima =
        a.n.par_iter()
            .map(|&n| Ok(max_chsh(n, a.v, strategy, SearchMode::BetaFamily)?))
            .collect::<Result<Vec<_>>>()?;

    #[derive(Serialize)]
    struct Row {
        beta: f64,
        n: usize,
        s: f64,
    }
    #[derive(Serialize)]
    struct Optimum {
        n: usize,
        beta: f64,
        s_max: f64,
    }
    #[derive(Serialize)]
    struct Out {
        rows: Vec<Row>,
        optima: Vec<Optimum>,
    }
    let out = Out {
        rows: grid
            .iter()
            .zip(&values)
            .map(|(&(n, beta), &s)| Row { beta, n, s })
            .collect(),
        optima: a
            .n
            .iter()
            .zip(&optima)
            .map(|(&n, o)| Optimum {
                n,
                beta: o.beta(),
                s_max: o.s_max,
            })
            .collect(),
    };
    finish("max-s", a, &a.output, &out, || {
        let mut s = String::new();
        for o in &out.optima {
            s += &format!(
                "# optimum n={} beta={} s={}\n",
                o.n,
                sig6(o.beta),
                sig6(o.s_max)
            );
        }
        s += "beta,n,s,strategy\n";
        for r in &out.rows {
            s += &format!("{},{},{},{}\n", sig6(r.beta), r.n, sig6(r.s), strategy);
        }
        s
    })
}

fn simulate_cmd(a: &SimulateArgs) -> Result<()> {
    let detector = DetectorModel {
        eta_t_a: a.eta_t_a,
        eta_r_a: a.eta_r_a,
        eta_t_b: a.eta_t_b,
        eta_r_b: a.eta_r_b,
        discard_probability: a.discard,
    };
    let table = a.table.map(CorrelatorTable::unbiased).transpose()?;
    let mut streams: Vec<EventStream> = Vec::new();
    for (k, &beta) in a.beta.expand(a.steps as usize).iter().enumerate() {
        let recipe = SimulationRecipe {
            beta,
            visibility: a.v,
            table_override: table,
            events_per_stream: a.events,
            detector,
            symmetrize: a.symmetrize,
            seed: a.seed.wrapping_add(4 * k as u64),
        };
        streams.extend(simulate(&recipe)?);
    }
    let dest = destination(&a.out, "events.jsonl")?;
    match dest {
        Some(path) => write_events(&path, a, &streams),
        None => Ok(write_jsonl(&streams, std::io::stdout().lock())?),
    }
}

fn write_events(path: &Path, a: &SimulateArgs, streams: &[EventStream]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let w = BufWriter::new(file);
    match EventFormat::from_path(path) {
        EventFormat::Jsonl => write_jsonl(streams, w)?,
        EventFormat::Csv => {
            let prov = Provenance::new("simulate", a).csv_comments()?;
            let comments: Vec<String> = prov
                .lines()
                .map(|l| l.trim_start_matches("# ").to_string())
                .collect();
            write_csv_with_comments(streams, &comments, w)?
        }
    }
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let runs = ingest(&a.files)?;
    let criterion = match a.criterion {
        CriterionArg::Point => ViolationCriterion::PointEstimate,
        CriterionArg::Ksigma => ViolationCriterion::MinusKSigma(a.k),
    };
    let curve = find_nc(
        &runs,
        a.binning.strategy(),
        &a.n,
        criterion,
        a.resamples,
        a.seed,
    )?;
    let summary = curve.summary();
    eprintln!("{}", serde_json::to_string(&summary)?);

    #[derive(Serialize)]
    struct Out<'a> {
        summary: manybell::analyze::SnSummary,
        curve: &'a manybell::analyze::SnCurve,
    }
    let out = Out {
        summary: summary.clone(),
        curve: &curve,
    };
    finish("analyze", a, &a.output, &out, || {
        format!(
            "# summary {}\n",
            serde_json::to_string(&summary).unwrap_or_default()
        ) + &curve.to_csv()
    })
}

fn compare(a: &CompareArgs) -> Result<()> {
    let vs = a.v.expand(a.steps as usize);
    let majority = BinningStrategy::Majority(a.tie.policy());
    let table = binning_comparison(&vs, &a.n, majority)?;
    finish("compare", a, &a.output, &table, || {
        let mut s = match table.crossover {
            Some(v) => format!("# crossover {}\n", sig6(v)),
            None => "# crossover none\n".to_string(),
        };
        s += "v,n,s_majority,s_parity\n";
        for r in &table.rows {
            s += &format!(
                "{},{},{},{}\n",
                sig6(r.visibility),
                r.n,
                sig6(r.s_majority),
                sig6(r.s_parity)
            );
        }
        s
    })
}

fn ratio(a: &RatioArgs) -> Result<()> {
    let points =
        a.v.expand(a.steps as usize)
            .into_iter()
            .map(violation_ratio)
            .collect::<Result<Vec<_>, _>>()?;
    finish("ratio", a, &a.output, &points, || {
        let mut s = String::from("v,n_c,n_half,ratio\n");
        for p in &points {
            s += &format!(
                "{},{},{},{}\n",
                sig6(p.visibility),
                sig6(p.n_critical),
                p.n_half,
                sig6(p.ratio)
            );
        }
        s
    })
}
