//! One function per subcommand. Each returns the JSON summary printed to stdout.

use std::path::{Path, PathBuf};

use microlab_core::constructions::{branching_profile, constant_profile, example_sequence, recovery_sequence};
use microlab_core::covering::{verify_cover, whitney_cover, CoverOptions, VerifyOptions};
use microlab_core::energy::{energy_analytic, energy_grid, evaluate_grid, EnergyParams, Form};
use microlab_core::fields::io::{field_from_str, field_to_string, MAGIC};
use microlab_core::fields::{AnalyticProfile, BoundaryCondition};
use microlab_core::minimizer::{minimize, trace_csv, Init};
use microlab_core::sbv_limit::{jump_length, limit_energy, single_jump_example, PiecewiseSBV};
use microlab_core::scaling_lab::{
    fit_exponent, log_space, read_csv, records_to_csv, sandwich_check, sweep, Regime, SweepOptions, SweepRecord,
};
use serde_json::{json, Value};

use crate::config::{Config, Kind};
use crate::error::CliError;
use crate::output::Artifacts;

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Form matching a boundary tag; `None` keeps the configured form.
fn form_for(bc: BoundaryCondition, params: &EnergyParams<f64>) -> EnergyParams<f64> {
    match bc {
        BoundaryCondition::DirichletLeftZero => params.with_form(Form::Unrescaled),
        BoundaryCondition::DirichletLeftIdentity => params.with_form(Form::Rescaled),
        BoundaryCondition::None => *params,
    }
}

fn load_profile(path: &Path) -> Result<AnalyticProfile<f64>, CliError> {
    let text = read(path)?;
    let v: Value = parse_json(path, &text)?;
    // Accept either a bare profile or a `construct` listing.
    let prof_value = v.get("profile").cloned().unwrap_or(v);
    let prof: AnalyticProfile<f64> = serde_json::from_value(prof_value).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    prof.validate()?;
    Ok(prof)
}

fn load_limit(path: Option<&Path>, params: &EnergyParams<f64>) -> Result<PiecewiseSBV<f64>, CliError> {
    match path {
        Some(p) => parse_json(p, &read(p)?),
        None => Ok(single_jump_example(0.5, 1.0, params.p, params.sigma)?),
    }
}

pub fn energy(cfg: &Config, input: Option<&Path>, out: &mut Artifacts) -> Result<Value, CliError> {
    let params = cfg.params.resolve()?;
    let (source, e) = match input {
        None => {
            let prof = constant_profile::<f64>();
            ("constant".to_string(), energy_analytic(&prof, &params.with_form(Form::Unrescaled))?)
        }
        Some(path) => {
            let text = read(path)?;
            if text.trim_start().starts_with(MAGIC) {
                let f = field_from_str::<f64>(&text)?;
                let e = match f.bc() {
                    BoundaryCondition::None => evaluate_grid(&f, &params)?,
                    bc => energy_grid(&f, &form_for(bc, &params))?,
                };
                ("microfield".to_string(), e)
            } else {
                let prof = load_profile(path)?;
                ("profile".to_string(), energy_analytic(&prof, &form_for(prof.bc, &params))?)
            }
        }
    };
    let doc = json!({ "source": source, "energy": e });
    out.write_json("energy.json", &doc)?;
    Ok(doc)
}

pub fn construct(cfg: &Config, input: Option<&Path>, out: &mut Artifacts) -> Result<Value, CliError> {
    let params = cfg.params.resolve()?;
    let (prof, eparams, extra): (AnalyticProfile<f64>, EnergyParams<f64>, Value) = match cfg.construct.kind {
        Kind::Constant => (constant_profile(), params.with_form(Form::Unrescaled), Value::Null),
        Kind::Branching => {
            let v = params.with_form(Form::Unrescaled);
            let (prof, spec) = branching_profile(&v)?;
            (prof, v, serde_json::to_value(&spec).expect("serializable"))
        }
        Kind::Example => {
            let prof = example_sequence(params.theta, cfg.construct.alpha, params.p)?;
            (prof, params.with_form(Form::Rescaled), json!({ "alpha": cfg.construct.alpha }))
        }
        Kind::Recovery => {
            let u = load_limit(input, &params)?;
            let prof = recovery_sequence(&u, params.theta)?;
            let r = EnergyParams::rescaled(u.p, params.theta, u.sigma)?;
            (prof, r, Value::Null)
        }
    };
    emit_profile(cfg, &prof, &eparams, extra, out)
}

fn emit_profile(
    cfg: &Config,
    prof: &AnalyticProfile<f64>,
    params: &EnergyParams<f64>,
    extra: Value,
    out: &mut Artifacts,
) -> Result<Value, CliError> {
    let e = energy_analytic(prof, params)?;
    let (nx, ny) = cfg.grid.dims();
    let field = prof.sample(nx, ny, prof.bc)?;
    out.write_json(
        "profile.json",
        &json!({ "profile": prof, "interfaces": prof.interfaces()?, "construction": extra }),
    )?;
    out.write("field.microfield", &field_to_string(&field))?;
    let doc = json!({ "energy": e, "cells": prof.cell_count(), "grid": [nx, ny] });
    out.write_json("energy.json", &doc)?;
    Ok(doc)
}

pub fn limit_energy_cmd(cfg: &Config, input: Option<&Path>, out: &mut Artifacts) -> Result<Value, CliError> {
    let params = cfg.params.resolve()?;
    let u = load_limit(input, &params)?;
    let report = u.validate();
    if !report.passes() {
        out.write_json("limit_energy.json", &json!({ "valid": false, "violations": report.violations }))?;
        return Err(microlab_core::Error::InvalidLimit(report.to_string()).into());
    }
    let e = limit_energy(&u)?;
    let doc = json!({ "valid": true, "energy": e, "jump_length": jump_length(&u) });
    out.write_json("limit_energy.json", &doc)?;
    Ok(doc)
}

pub fn recover(cfg: &Config, input: Option<&Path>, out: &mut Artifacts) -> Result<Value, CliError> {
    let params = cfg.params.resolve()?;
    let u = load_limit(input, &params)?;
    let limit = limit_energy(&u)?;
    let prof = recovery_sequence(&u, params.theta)?;
    let r = EnergyParams::rescaled(u.p, params.theta, u.sigma)?;
    let mut doc = emit_profile(cfg, &prof, &r, json!({ "limit_energy": limit }), out)?;
    doc["limit_energy"] = serde_json::to_value(limit).expect("serializable");
    Ok(doc)
}

pub fn minimize_cmd(cfg: &Config, init: &str, out: &mut Artifacts) -> Result<Value, CliError> {
    let params = cfg.params.resolve()?;
    let mut opts = cfg.minimize.clone();
    if let Some(nx) = cfg.grid.nx {
        opts.nx = nx;
    }
    if let Some(ny) = cfg.grid.ny {
        opts.ny = ny;
    }
    let init = match init {
        "constant" => Init::Constant,
        "branching" => Init::Branching,
        "random" => Init::Random,
        path => {
            let p = PathBuf::from(path);
            let f = field_from_str::<f64>(&read(&p)?)?;
            opts.nx = f.nx();
            opts.ny = f.ny();
            Init::Given(f)
        }
    };
    let r = minimize(&params, &opts, &init)?;
    out.write("trace.csv", &trace_csv(&r.trace))?;
    out.write("field.microfield", &field_to_string(&r.field))?;
    let doc = json!({
        "energy": r.energy,
        "status": r.status,
        "iterations": r.trace.last().map_or(0, |t| t.iter),
        "grid": [opts.nx, opts.ny],
    });
    out.write_json("result.json", &doc)?;
    Ok(doc)
}

fn eps_list(cfg: &Config) -> Result<Vec<f64>, CliError> {
    if let Some(list) = &cfg.sweep.epsilons {
        return Ok(list.clone());
    }
    let r = cfg.sweep.log_range;
    if r.n == 0 || !(r.lo > 0.0 && r.hi >= r.lo) {
        return Err(CliError::Config("sweep.log_range needs 0 < lo <= hi and n >= 1".into()));
    }
    let tp = cfg.params.theta.powf(cfg.params.p);
    Ok(log_space(r.lo * tp, r.hi * tp, r.n))
}

fn run_sweep(cfg: &Config) -> Result<Vec<SweepRecord<f64>>, CliError> {
    let opts = SweepOptions {
        constructions: cfg.sweep.constructions.clone(),
        refine_with_minimizer: cfg.sweep.refine.then(|| cfg.minimize.clone()),
    };
    Ok(sweep(cfg.params.p, cfg.params.theta, &eps_list(cfg)?, &opts)?)
}

fn sweep_or_load(cfg: &Config, input: Option<&Path>) -> Result<Vec<SweepRecord<f64>>, CliError> {
    match input {
        Some(p) => Ok(read_csv(read(p)?.as_bytes())?),
        None => run_sweep(cfg),
    }
}

pub fn sweep_cmd(cfg: &Config, out: &mut Artifacts) -> Result<Value, CliError> {
    let records = run_sweep(cfg)?;
    out.write("sweep.csv", &records_to_csv(&records))?;
    let failures = records.iter().filter(|r| r.error.is_some()).count();
    Ok(json!({ "records": records.len(), "failures": failures }))
}

pub fn fit(cfg: &Config, input: Option<&Path>, out: &mut Artifacts) -> Result<Value, CliError> {
    let records = sweep_or_load(cfg, input)?;
    let f = fit_exponent(&records, Regime::Branching)?;
    let p = records.first().map_or(cfg.params.p, |r| r.p);
    let doc = json!({ "fit": f, "expected_slope": p / (p + 1.0) });
    out.write_json("fit.json", &doc)?;
    Ok(doc)
}

pub fn sandwich(cfg: &Config, input: Option<&Path>, out: &mut Artifacts) -> Result<Value, CliError> {
    let records = sweep_or_load(cfg, input)?;
    let r = sandwich_check(&records);
    let doc = serde_json::to_value(&r).expect("serializable");
    out.write_json("sandwich.json", &doc)?;
    Ok(json!({ "band": r.band, "passes": r.passes }))
}

pub fn cover(cfg: &Config, seed: u64, out: &mut Artifacts) -> Result<Value, CliError> {
    let c = &cfg.cover;
    let omega = c.domain.resolve()?;
    let cover = whitney_cover(&omega, c.delta, CoverOptions { depth: c.depth })?;
    let report = verify_cover(
        &cover,
        VerifyOptions {
            samples: c.samples,
            seed,
            ..Default::default()
        },
    );
    out.write_json("cover.json", &cover.to_json(&report))?;
    out.write_json("cover_report.json", &report)?;
    let doc = json!({ "squares": report.squares, "passes": report.passes, "constants": report.constants });
    if !report.passes {
        return Err(microlab_core::Error::InvalidParameter(format!("cover verification failed: {report:?}")).into());
    }
    Ok(doc)
}
