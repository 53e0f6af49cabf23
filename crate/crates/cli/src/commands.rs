//! One function per subcommand. Each parses its config, validates, and —
//! unless `--dry-run` — computes, writes the artifact, and returns a one-line
//! summary for stdout.

use std::f64::consts::TAU;
use std::path::Path;

use gawqed::dynamics::{avoided_crossing_branches, chevron_experiment, t1_experiment};
use gawqed::estimation::{dataset_from_csv, dataset_to_csv, fit, synthesize, Params};
use gawqed::sequences::{
    entangled_target, entangling_protocol, fidelity, run_schedule, ProtocolOptions,
};
use gawqed::{dynamics, spectra, DeviceLayout64, DensityMatrix64};
use serde::Serialize;

use crate::config::*;
use crate::{CliError, Ctx};

/// Formats a float with `.` decimal separator and round-trip precision.
fn fmt(x: f64) -> String {
    format!("{x}")
}

fn linspace(start: f64, stop: f64, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
    if n < 2 {
        return Err(CliError::validation(format!(
            "{what}: need at least 2 grid points, got {n}"
        )));
    }
    if !(stop > start) || !start.is_finite() || !stop.is_finite() {
        return Err(CliError::validation(format!(
            "{what}: grid needs finite start < stop (got {start} .. {stop})"
        )));
    }
    let step = (stop - start) / (n - 1) as f64;
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

fn atom_index(layout: &DeviceLayout64, id: &str) -> Result<usize, CliError> {
    layout
        .atom_index(id)
        .ok_or_else(|| CliError::validation(format!("unknown atom id {id:?}")))
}

fn write_artifact(ctx: &Ctx, contents: &str) -> Result<(), CliError> {
    let out = ctx.out()?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() && !parent.exists() {
            return Err(CliError::validation(format!(
                "output directory {:?} does not exist",
                parent
            )));
        }
    }
    std::fs::write(out, contents)
        .map_err(|e| CliError::validation(format!("cannot write {:?}: {e}", out)))
}

fn write_json<T: Serialize>(ctx: &Ctx, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::validation(format!("cannot serialize output: {e}")))?;
    text.push('\n');
    write_artifact(ctx, &text)
}

// ---------------------------------------------------------------------------
// spectra
// ---------------------------------------------------------------------------

pub fn spectra_cmd(ctx: &Ctx) -> Result<String, CliError> {
    let cfg: SpectraConfig = ctx.parse_config()?;
    let layout = cfg.device.to_layout()?;
    let grid = linspace(cfg.f_start_hz, cfg.f_stop_hz, cfg.n_points, "frequency")?;
    if ctx.dry_run {
        return Ok(format!(
            "spectra: dry-run ok ({} atoms, {} points over {} .. {} Hz)",
            layout.atoms().len(),
            grid.len(),
            fmt(cfg.f_start_hz),
            fmt(cfg.f_stop_hz)
        ));
    }

    let omega_grid: Vec<f64> = grid.iter().map(|f| TAU * f).collect();
    let samples = spectra::sweep(&layout, &omega_grid)?;

    let ids: Vec<&str> = layout.atoms().iter().map(|a| a.id()).collect();
    let n = ids.len();
    let mut csv = String::from("f_hz");
    for id in &ids {
        csv.push_str(&format!(",gamma_{id}_hz"));
    }
    for j in 0..n {
        for k in (j + 1)..n {
            csv.push_str(&format!(",g_{}_{}_hz", ids[j], ids[k]));
        }
    }
    for j in 0..n {
        for k in (j + 1)..n {
            csv.push_str(&format!(",gamma_coll_{}_{}_hz", ids[j], ids[k]));
        }
    }
    csv.push('\n');
    for (f, s) in grid.iter().zip(&samples) {
        csv.push_str(&fmt(*f));
        for j in 0..n {
            csv.push_str(&format!(",{}", fmt(s.gamma[j] / TAU)));
        }
        for j in 0..n {
            for k in (j + 1)..n {
                csv.push_str(&format!(",{}", fmt(s.g[(j, k)] / TAU)));
            }
        }
        for j in 0..n {
            for k in (j + 1)..n {
                csv.push_str(&format!(",{}", fmt(s.gamma_coll[(j, k)] / TAU)));
            }
        }
        csv.push('\n');
    }
    write_artifact(ctx, &csv)?;

    // Report the grid minimum of the first atom's relaxation rate.
    let (i_min, g_min) = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.gamma[0] / TAU))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    Ok(format!(
        "spectra: {} points, {} atoms; min gamma_{} = {} Hz at {} Hz",
        grid.len(),
        n,
        ids[0],
        fmt(g_min),
        fmt(grid[i_min])
    ))
}

// ---------------------------------------------------------------------------
// df
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DfReport {
    atom: String,
    band_hz: [f64; 2],
    frequencies: Vec<DfEntry>,
}

#[derive(Serialize)]
struct DfEntry {
    f_hz: f64,
    residual_hz: f64,
}

pub fn df_cmd(ctx: &Ctx) -> Result<String, CliError> {
    let cfg: DfConfig = ctx.parse_config()?;
    let layout = cfg.device.to_layout()?;
    let idx = atom_index(&layout, &cfg.atom)?;
    if !(cfg.tol_hz > 0.0) {
        return Err(CliError::validation("tol_hz must be > 0"));
    }
    if !(cfg.f_start_hz > 0.0) || !(cfg.f_stop_hz > cfg.f_start_hz) {
        return Err(CliError::validation(
            "need 0 < f_start_hz < f_stop_hz for the search band",
        ));
    }
    if ctx.dry_run {
        return Ok(format!(
            "df: dry-run ok (atom {:?}, band {} .. {} Hz)",
            cfg.atom,
            fmt(cfg.f_start_hz),
            fmt(cfg.f_stop_hz)
        ));
    }

    let found = spectra::find_df_frequencies(
        &layout,
        idx,
        (TAU * cfg.f_start_hz, TAU * cfg.f_stop_hz),
        TAU * cfg.tol_hz,
    )?;
    let report = DfReport {
        atom: cfg.atom.clone(),
        band_hz: [cfg.f_start_hz, cfg.f_stop_hz],
        frequencies: found
            .iter()
            .map(|d| DfEntry {
                f_hz: d.omega / TAU,
                residual_hz: d.residual / TAU,
            })
            .collect(),
    };
    write_json(ctx, &report)?;

    let list: Vec<String> = report.frequencies.iter().map(|d| fmt(d.f_hz)).collect();
    Ok(format!(
        "df: atom {:?} has {} decoherence-free frequency(ies) in band: [{}] Hz",
        cfg.atom,
        list.len(),
        list.join(", ")
    ))
}

// ---------------------------------------------------------------------------
// t1
// ---------------------------------------------------------------------------

pub fn t1_cmd(ctx: &Ctx) -> Result<String, CliError> {
    let cfg: T1Config = ctx.parse_config()?;
    let layout = cfg.device.to_layout()?;
    let idx = atom_index(&layout, &cfg.atom)?;
    if !(cfg.f_hz > 0.0) {
        return Err(CliError::validation("f_hz must be > 0"));
    }
    let times = linspace(0.0, cfg.t_max_s, cfg.n_points, "time")?;
    if ctx.dry_run {
        return Ok(format!(
            "t1: dry-run ok (atom {:?} at {} Hz, {} times)",
            cfg.atom,
            fmt(cfg.f_hz),
            times.len()
        ));
    }

    let result = t1_experiment(&layout, idx, TAU * cfg.f_hz, &times)?;
    let mut csv = format!("t_s,pop_{}\n", cfg.atom);
    for (t, p) in result.times.iter().zip(&result.populations) {
        csv.push_str(&format!("{},{}\n", fmt(*t), fmt(*p)));
    }
    write_artifact(ctx, &csv)?;

    Ok(format!(
        "t1: atom {:?} at {} Hz: T1 = {} s (Gamma_1 = {} Hz, fit_ok = {})",
        cfg.atom,
        fmt(cfg.f_hz),
        fmt(result.t1),
        fmt(result.gamma_fit / TAU),
        result.fit_ok
    ))
}

// ---------------------------------------------------------------------------
// chevron
// ---------------------------------------------------------------------------

pub fn chevron_cmd(ctx: &Ctx) -> Result<String, CliError> {
    let cfg: ChevronConfig = ctx.parse_config()?;
    let layout = cfg.device.to_layout()?;
    if layout.atoms().len() != 2 {
        return Err(CliError::validation(
            "chevron experiment needs a 2-atom device",
        ));
    }
    let deltas = linspace(cfg.delta_start_hz, cfg.delta_stop_hz, cfg.n_delta, "detuning")?;
    let times = linspace(0.0, cfg.t_max_s, cfg.n_t, "time")?;
    if !(cfg.f_df_hz > 0.0) {
        return Err(CliError::validation("f_df_hz must be > 0"));
    }
    if ctx.dry_run {
        return Ok(format!(
            "chevron: dry-run ok ({} detunings x {} times)",
            deltas.len(),
            times.len()
        ));
    }

    let omega_deltas: Vec<f64> = deltas.iter().map(|d| TAU * d).collect();
    let map = chevron_experiment(&layout, TAU * cfg.f_df_hz, &omega_deltas, &times)?;

    let mut csv = String::from("delta_hz,t_s,population\n");
    for (i, d) in deltas.iter().enumerate() {
        for (k, t) in times.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{}\n",
                fmt(*d),
                fmt(*t),
                fmt(map.population[i][k])
            ));
        }
    }
    write_artifact(ctx, &csv)?;

    // Resonant column closest to zero detuning: first population minimum of
    // the excited atom marks the half swap period.
    let i0 = deltas
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let col = &map.population[i0];
    let k_min = (1..col.len() - 1)
        .find(|&k| col[k] <= col[k - 1] && col[k] <= col[k + 1])
        .unwrap_or(col.len() - 1);
    Ok(format!(
        "chevron: {} detunings x {} times; near-resonant (delta = {} Hz) first swap minimum at t = {} s -> full-swap period {} s",
        deltas.len(),
        times.len(),
        fmt(deltas[i0]),
        fmt(times[k_min]),
        fmt(2.0 * times[k_min])
    ))
}

// ---------------------------------------------------------------------------
// crossing
// ---------------------------------------------------------------------------

pub fn crossing_cmd(ctx: &Ctx) -> Result<String, CliError> {
    let cfg: CrossingConfig = ctx.parse_config()?;
    let layout = cfg.device.to_layout()?;
    if layout.atoms().len() != 2 {
        return Err(CliError::validation(
            "avoided-crossing experiment needs a 2-atom device",
        ));
    }
    if !(cfg.f_fixed_hz > 0.0) {
        return Err(CliError::validation("f_fixed_hz must be > 0"));
    }
    let grid = linspace(cfg.f_start_hz, cfg.f_stop_hz, cfg.n_points, "frequency")?;
    if ctx.dry_run {
        return Ok(format!(
            "crossing: dry-run ok ({} points around {} Hz)",
            grid.len(),
            fmt(cfg.f_fixed_hz)
        ));
    }

    let w_fixed = TAU * cfg.f_fixed_hz;
    let mut csv = String::from("f_hz,f_plus_hz,f_minus_hz,g_hz\n");
    let mut min_split = f64::INFINITY;
    let mut min_f = grid[0];
    for &f in &grid {
        let w = TAU * f;
        // The exchange coupling is evaluated at the mean of the two qubit
        // frequencies, matching the dynamics' convention for detuned atoms.
        let g = spectra::g_general(&layout, 0, 1, 0.5 * (w + w_fixed))?;
        let (wp, wm) = avoided_crossing_branches(w, w_fixed, g);
        if wp - wm < min_split {
            min_split = wp - wm;
            min_f = f;
        }
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt(f),
            fmt(wp / TAU),
            fmt(wm / TAU),
            fmt(g / TAU)
        ));
    }
    write_artifact(ctx, &csv)?;

    Ok(format!(
        "crossing: {} points; minimum splitting {} Hz at f = {} Hz",
        grid.len(),
        fmt(min_split / TAU),
        fmt(min_f)
    ))
}

// ---------------------------------------------------------------------------
// sequence
// ---------------------------------------------------------------------------

pub fn sequence_cmd(ctx: &Ctx) -> Result<String, CliError> {
    let cfg: SequenceConfig = ctx.parse_config()?;
    let layout = cfg.device.to_layout()?;
    let schedule = cfg.schedule.to_schedule(&layout)?;
    if schedule.segments.is_empty() {
        return Err(CliError::validation("schedule has no segments"));
    }
    let n = layout.atoms().len();

    let rho0 = match &cfg.initial {
        InitialState::Ground => DensityMatrix64::ground(n),
        InitialState::Excited { excited } => {
            let idx = atom_index(&layout, excited)?;
            dynamics::excited_state(n, idx)
        }
    };
    if let Some(f) = &cfg.fidelity {
        if f.target != "entangled_pair" {
            return Err(CliError::validation(format!(
                "unknown fidelity target {:?} (supported: \"entangled_pair\")",
                f.target
            )));
        }
        if n != 2 {
            return Err(CliError::validation(
                "fidelity target \"entangled_pair\" needs a 2-atom device",
            ));
        }
        if f.frame_correct_from_segment >= schedule.segments.len() {
            return Err(CliError::validation(
                "frame_correct_from_segment is past the last segment",
            ));
        }
    }
    if ctx.dry_run {
        return Ok(format!(
            "sequence: dry-run ok ({} segments, {} gates, {} measurements)",
            schedule.segments.len(),
            schedule.gates.len(),
            schedule.measurements.len()
        ));
    }

    let run = run_schedule(
        &layout,
        &schedule,
        &rho0,
        cfg.rotating_frame_hz.map(|f| TAU * f),
    )?;

    let ids: Vec<&str> = layout.atoms().iter().map(|a| a.id()).collect();
    let mut csv = String::from("segment,t_s");
    for id in &ids {
        csv.push_str(&format!(",pop_{id}"));
    }
    csv.push('\n');
    let mut t = 0.0;
    for (i, state) in run.states.iter().enumerate() {
        t += schedule.segments[i].duration;
        csv.push_str(&format!("{},{}", i, fmt(t)));
        for q in 0..n {
            csv.push_str(&format!(",{}", fmt(state.population(q))));
        }
        csv.push('\n');
    }
    write_artifact(ctx, &csv)?;

    let finals: Vec<String> = (0..n)
        .map(|q| format!("pop_{} = {}", ids[q], fmt(run.final_state().population(q))))
        .collect();
    let mut summary = format!(
        "sequence: {} segments run; {}",
        schedule.segments.len(),
        finals.join(", ")
    );
    if let Some(fc) = &cfg.fidelity {
        let rho = run.frame_corrected_since(&layout, fc.frame_correct_from_segment)?;
        let fid = fidelity(&rho, &entangled_target())?;
        summary.push_str(&format!("; fidelity to entangled_pair = {}", fmt(fid)));
    }
    if !run.measured.is_empty() {
        let ms: Vec<String> = run
            .measured
            .iter()
            .map(|(b, v)| format!("<{b}> = {}", fmt(*v)))
            .collect();
        summary.push_str(&format!("; measured {}", ms.join(", ")));
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------
// tomography
// ---------------------------------------------------------------------------

pub fn tomography_cmd(ctx: &Ctx) -> Result<String, CliError> {
    let cfg: TomographyConfig = ctx.parse_config()?;
    let layout = cfg.device.to_layout()?;
    if layout.atoms().len() != 2 {
        return Err(CliError::validation(
            "tomography protocol needs a 2-atom device",
        ));
    }
    for (name, v) in [
        ("f_df1_hz", cfg.f_df1_hz),
        ("f_df2_hz", cfg.f_df2_hz),
        ("g_eff_hz", cfg.g_eff_hz),
    ] {
        if !(v > 0.0) {
            return Err(CliError::validation(format!("{name} must be > 0")));
        }
    }
    if cfg.idle_s < 0.0 {
        return Err(CliError::validation("idle_s must be >= 0"));
    }
    if ctx.dry_run {
        return Ok(format!(
            "tomography: dry-run ok (interaction {} s, shots {:?})",
            fmt(1.0 / (8.0 * cfg.g_eff_hz)),
            cfg.shots
        ));
    }

    let options = ProtocolOptions {
        idle_duration: cfg.idle_s,
        shots: cfg.shots,
        seed: ctx.seed.unwrap_or(cfg.seed),
    };
    let result = entangling_protocol(
        &layout,
        TAU * cfg.f_df1_hz,
        TAU * cfg.f_df2_hz,
        TAU * cfg.g_eff_hz,
        &options,
    )?;

    let mut csv = String::from("pauli_label,expectation\n");
    for (label, value) in &result.expectations {
        csv.push_str(&format!("{},{}\n", label, fmt(*value)));
    }
    write_artifact(ctx, &csv)?;

    Ok(format!(
        "tomography: fidelity to (|01> - i|10>)/sqrt(2) = {} ({} expectations{})",
        fmt(result.fidelity),
        result.expectations.len(),
        match cfg.shots {
            Some(s) => format!(", {s} shots"),
            None => String::new(),
        }
    ))
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CalibrateReport {
    qubits: Vec<CalibrateEntry>,
}

#[derive(Serialize)]
struct CalibrateEntry {
    id: String,
    target_hz: f64,
    flux_fq: f64,
    voltage_v: f64,
}

pub fn calibrate_cmd(ctx: &Ctx) -> Result<String, CliError> {
    let cfg: CalibrateConfig = ctx.parse_config()?;
    let cal = cfg.calibration.to_calibration::<f64>()?;
    let mut targets = Vec::with_capacity(cal.qubit_ids.len());
    for id in &cal.qubit_ids {
        let t = cfg.targets_hz.get(id).ok_or_else(|| {
            CliError::validation(format!("targets_hz is missing qubit {id:?}"))
        })?;
        targets.push(*t);
    }
    for id in cfg.targets_hz.keys() {
        if !cal.qubit_ids.contains(id) {
            return Err(CliError::validation(format!(
                "targets_hz names unknown qubit {id:?}"
            )));
        }
    }
    if ctx.dry_run {
        return Ok(format!(
            "calibrate: dry-run ok ({} qubits)",
            cal.qubit_ids.len()
        ));
    }

    let voltages = gawqed::calibration::voltages_for_targets(&cal, &targets)?;
    let fluxes = cal.crosstalk.fluxes_for_voltages(&voltages)?;
    let report = CalibrateReport {
        qubits: cal
            .qubit_ids
            .iter()
            .zip(&targets)
            .zip(fluxes.iter().zip(&voltages))
            .map(|((id, t), (flux, v))| CalibrateEntry {
                id: id.clone(),
                target_hz: *t,
                flux_fq: *flux,
                voltage_v: *v,
            })
            .collect(),
    };
    write_json(ctx, &report)?;

    let vs: Vec<String> = report
        .qubits
        .iter()
        .map(|q| format!("{} = {} V", q.id, fmt(q.voltage_v)))
        .collect();
    Ok(format!("calibrate: solved voltages {}", vs.join(", ")))
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

pub fn fit_cmd(ctx: &Ctx) -> Result<String, CliError> {
    let cfg: FitConfig = ctx.parse_config()?;
    let dataset_path = {
        let p = Path::new(&cfg.dataset_csv);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            ctx.config
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(p)
        }
    };
    let text = std::fs::read_to_string(&dataset_path).map_err(|e| {
        CliError::validation(format!("cannot read dataset {:?}: {e}", dataset_path))
    })?;
    let dataset = dataset_from_csv::<f64>(&text)?;
    let kind = cfg.model.to_kind();
    let spec: Vec<_> = cfg.params.iter().map(|p| p.to_spec()).collect();
    if cfg.restarts == 0 {
        return Err(CliError::validation("restarts must be >= 1"));
    }
    if ctx.dry_run {
        return Ok(format!(
            "fit: dry-run ok ({} data points, {} model, {} parameters)",
            dataset.len(),
            kind.name(),
            spec.len()
        ));
    }

    let seed = ctx.seed.unwrap_or(cfg.seed);
    let result = fit(&dataset, &kind, &spec, cfg.restarts, seed)?;
    write_json(ctx, &result.to_report())?;

    Ok(format!(
        "fit: {} model on {} points, seed {}: residual_rms = {} Hz, converged = {} ({} iterations)",
        kind.name(),
        dataset.len(),
        seed,
        fmt(result.residual_rms),
        result.converged,
        result.iterations
    ))
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub fn synth_cmd(ctx: &Ctx) -> Result<String, CliError> {
    let cfg: SynthConfig = ctx.parse_config()?;
    let kind = cfg.model.to_kind();
    let params: Params<f64> = cfg.params.clone().into_iter().collect();
    for required in kind.required_params() {
        if !params.contains_key(required) {
            return Err(CliError::validation(format!(
                "params is missing {required:?}"
            )));
        }
    }
    if cfg.noise_sigma_hz < 0.0 {
        return Err(CliError::validation("noise_sigma_hz must be >= 0"));
    }
    let grid = linspace(cfg.f_start_hz, cfg.f_stop_hz, cfg.n_points, "frequency")?;
    if ctx.dry_run {
        return Ok(format!(
            "synth: dry-run ok ({} model, {} points)",
            kind.name(),
            grid.len()
        ));
    }

    let seed = ctx.seed.unwrap_or(cfg.seed);
    let dataset = synthesize(&kind, &params, &grid, cfg.noise_sigma_hz, seed)?;
    write_artifact(ctx, &dataset_to_csv(&dataset))?;

    Ok(format!(
        "synth: {} model, {} rows ({} frequencies), noise sigma = {} Hz, seed {}",
        kind.name(),
        dataset.len(),
        grid.len(),
        fmt(cfg.noise_sigma_hz),
        seed
    ))
}
