use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use qsi_core::bench::{compare, Comparison, ShotBudget};
use qsi_core::fit::{Calibration, FringeEstimate};
use qsi_core::io::{
    read_json, read_pgm, read_slice_csv, write_json, write_pgm, write_slice_table, write_text, Sidecar,
};
use qsi_core::optics::{
    prepare_qubit, synthesize_set, FringeSource, Interferogram, InterferogramMeta, InterferometerConfig,
    PreparationSetting,
};
use qsi_core::pipeline::{calibrate_with_sweep, default_calibration_angles, derive_seed, estimate_images, ideal_calibration, measure_qudit};
use qsi_core::quantum::{pure_fidelity, DensityMatrix, QubitState, QuditPureState};
use qsi_core::reconstruct::{invert_qubit, invert_qudit, reconstruct_pure_assumed, ReconstructionResult};
use qsi_core::sweep::{run_sweep, SweepSpec};

use crate::error::{Class, CliError};
use crate::manifest::RunManifest;
use crate::{BenchArgs, FitArgs, GlobalArgs, QuditDemoArgs, ReconstructArgs, SimulateArgs, SweepArgs};

type Result<T> = std::result::Result<T, CliError>;

pub const SIDECAR_FILE: &str = "sidecar.json";

/// Config file (or defaults), then `--set` overrides, then `--seed`.
fn load_config(g: &GlobalArgs) -> Result<InterferometerConfig> {
    let mut value = match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::new(Class::Io, format!("{}: {e}", path.display())))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| CliError::new(Class::Format, format!("{}: {e}", path.display())))?
        }
        None => serde_json::to_value(InterferometerConfig::default()).expect("serialisable config"),
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::new(Class::Format, "config must be a JSON object"))?;
    for kv in &g.set {
        let (key, raw) = kv
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        obj.insert(key.trim().to_string(), parsed);
    }
    let mut cfg: InterferometerConfig =
        serde_json::from_value(value).map_err(|e| CliError::new(Class::Config, format!("config: {e}")))?;
    if let Some(seed) = g.seed {
        cfg.rng_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out(g: &GlobalArgs) -> Result<&Path> {
    fs::create_dir_all(&g.out).map_err(|e| CliError::new(Class::Io, format!("{}: {e}", g.out.display())))?;
    Ok(&g.out)
}

fn manifest(command: &'static str, g: &GlobalArgs, cfg: &InterferometerConfig) -> RunManifest {
    RunManifest::new(command, &g.out, cfg.rng_seed, cfg, &g.set)
}

fn say(g: &GlobalArgs, line: impl AsRef<str>) {
    if !g.quiet {
        println!("{}", line.as_ref());
    }
}

fn warn(g: &GlobalArgs, line: impl AsRef<str>) {
    if !g.quiet {
        eprintln!("warning: {}", line.as_ref());
    }
}

fn read_state_json(path: &Path) -> Result<Value> {
    Ok(read_json::<Value>(path)?)
}

pub fn simulate(g: &GlobalArgs, a: &SimulateArgs) -> Result<()> {
    let qubit_spec = a.theta.is_some() || a.phi.is_some() || a.mu.is_some();
    let plate_spec = a.alpha.is_some() || a.beta.is_some() || a.no_qwp;
    let qudit_spec = a.qudit_file.is_some() || a.subspace.is_some();
    match (qubit_spec, plate_spec, qudit_spec) {
        (true, false, false) | (false, true, false) | (false, false, true) => {}
        (false, false, false) => {
            return Err(CliError::usage(
                "no state given: use --theta/--phi/--mu, --alpha/--beta [--no-qwp] or --qudit-file",
            ))
        }
        _ => return Err(CliError::usage("conflicting state options")),
    }

    let cfg = load_config(g)?;
    let mut preparation = None;
    let source = if qubit_spec {
        let theta = a.theta.ok_or_else(|| CliError::usage("--theta is required with --phi/--mu"))?;
        FringeSource::Qubit(QubitState::new(theta, a.phi.unwrap_or(0.0), a.mu.unwrap_or(1.0))?)
    } else if plate_spec {
        let alpha = a.alpha.ok_or_else(|| CliError::usage("--alpha is required for a waveplate preparation"))?;
        let setting = if a.no_qwp {
            if a.beta.is_some() {
                return Err(CliError::usage("--beta conflicts with --no-qwp"));
            }
            PreparationSetting::hwp_only(alpha)
        } else {
            PreparationSetting::new(alpha, a.beta.unwrap_or(0.0))
        };
        preparation = Some(setting);
        FringeSource::Qubit(prepare_qubit(&setting))
    } else {
        let path = a.qudit_file.as_ref().ok_or_else(|| CliError::usage("--subspace requires --qudit-file"))?;
        let state: QuditPureState = read_json(path)?;
        let subspace = a.subspace.unwrap_or(1);
        if subspace == 0 || subspace >= state.dim() {
            return Err(CliError::usage(format!("--subspace must be in 1..={}", state.dim() - 1)));
        }
        FringeSource::Qudit { state, subspace }
    };
    let obs = source.observables()?;

    let out = prepare_out(g)?;
    let images = synthesize_set(&source, &cfg)?;
    let mut names = Vec::with_capacity(images.len());
    for (i, img) in images.iter().enumerate() {
        let name = format!("image_{i:03}.pgm");
        let clipped = write_pgm(&out.join(&name), img)?;
        if clipped > 0 {
            warn(g, format!("{name}: {clipped} pixels clipped at 65535"));
        }
        names.push(name);
    }
    let sidecar = Sidecar {
        config: cfg.clone(),
        state: source,
        seed: cfg.rng_seed,
        preparation,
        images: names,
    };
    write_json(&out.join(SIDECAR_FILE), &sidecar)?;
    let mut m = manifest("simulate", g, &cfg);
    m.inputs = a.qudit_file.iter().cloned().collect();
    m.write()?;
    say(
        g,
        format!(
            "wrote {} images to {} (Φ = {:.6}, V = {:.6}, Ī = {:.6})",
            cfg.n_images,
            out.display(),
            obs.phase_shift,
            obs.visibility,
            obs.avg_intensity
        ),
    );
    Ok(())
}

fn default_meta(cfg: &InterferometerConfig, index: usize) -> InterferogramMeta {
    InterferogramMeta {
        config: cfg.clone(),
        source: None,
        preparation: None,
        image_index: index,
    }
}

fn load_image(path: &Path, meta: InterferogramMeta) -> Result<Interferogram> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    Ok(match ext.as_deref() {
        Some("csv") | Some("txt") => read_slice_csv(path, meta)?,
        _ => read_pgm(path, meta)?,
    })
}

fn load_images(inputs: &[PathBuf], cfg: &InterferometerConfig) -> Result<Vec<Interferogram>> {
    let mut images = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let sidecar: Sidecar = read_json(&input.join(SIDECAR_FILE))?;
            for (i, name) in sidecar.images.iter().enumerate() {
                let meta = InterferogramMeta {
                    config: sidecar.config.clone(),
                    source: Some(sidecar.state.clone()),
                    preparation: sidecar.preparation,
                    image_index: i,
                };
                images.push(load_image(&input.join(name), meta)?);
            }
        } else {
            let index = images.len();
            images.push(load_image(input, default_meta(cfg, index))?);
        }
    }
    if images.is_empty() {
        return Err(CliError::new(Class::Format, "no images found in the inputs"));
    }
    let rows = images[0].rows();
    if images.iter().any(|i| i.rows() != rows) {
        return Err(CliError::new(Class::Format, "images have different numbers of rows"));
    }
    Ok(images)
}

/// Calibration from a file written by `sweep`, or a bare number used as the
/// normalisation with zero phase reference.
fn load_calibration(spec: &str) -> Result<Calibration> {
    if let Ok(norm) = spec.trim().parse::<f64>() {
        return Ok(Calibration {
            norm_reference: norm,
            phase_reference: 0.0,
        });
    }
    Ok(read_json(Path::new(spec))?)
}

pub fn fit(g: &GlobalArgs, a: &FitArgs) -> Result<()> {
    let cfg = load_config(g)?;
    let images = load_images(&a.inputs, &cfg)?;
    let calibration = a.norm_ref.as_deref().map(load_calibration).transpose()?;
    let m = estimate_images(&images, calibration.as_ref())?;
    if calibration.is_none() {
        warn(g, "no --norm-ref given; avg_intensity is reported unnormalized");
    }
    let out = prepare_out(g)?;
    write_slice_table(&out.join("slices.csv"), &m.slices, images[0].rows())?;
    write_json(&out.join("estimate.json"), &m.estimate)?;
    let mut man = manifest("fit", g, &cfg);
    man.inputs = a.inputs.clone();
    if let Some(n) = &a.norm_ref {
        man.inputs.push(PathBuf::from(n));
    }
    man.write()?;
    let e = &m.estimate;
    say(
        g,
        format!(
            "Φ = {:.6} ± {:.6}, V = {:.6} ± {:.6}, Ī = {:.6} ± {:.6} from {} slices",
            e.phase_shift, e.phase_std, e.visibility, e.visibility_std, e.avg_intensity, e.avg_intensity_std, e.n_slices_used
        ),
    );
    Ok(())
}

enum Target {
    Qubit(QubitState),
    Qudit(QuditPureState),
}

fn load_target(path: &Path) -> Result<Target> {
    let v = read_state_json(path)?;
    let bad = |e: serde_json::Error| CliError::new(Class::Format, format!("{}: {e}", path.display()));
    if let Some(state) = v.get("state") {
        return Ok(match serde_json::from_value::<FringeSource>(state.clone()).map_err(bad)? {
            FringeSource::Qubit(s) => Target::Qubit(s),
            FringeSource::Qudit { state, .. } => Target::Qudit(state),
        });
    }
    if v.get("thetas").is_some() {
        Ok(Target::Qudit(serde_json::from_value(v).map_err(bad)?))
    } else {
        Ok(Target::Qubit(serde_json::from_value(v).map_err(bad)?))
    }
}

pub fn reconstruct(g: &GlobalArgs, a: &ReconstructArgs) -> Result<()> {
    let value = read_state_json(&a.input)?;
    let bad = |e: serde_json::Error| CliError::new(Class::Format, format!("{}: {e}", a.input.display()));
    let result = if value.is_array() {
        let ests: Vec<FringeEstimate> = serde_json::from_value(value).map_err(bad)?;
        let dim = a.dim.unwrap_or(ests.len() + 1);
        invert_qudit(&ests, dim)?
    } else {
        let est: FringeEstimate = serde_json::from_value(value).map_err(bad)?;
        match a.dim {
            Some(d) if d != 2 => invert_qudit(&[est], d)?,
            _ if a.assume_pure => reconstruct_pure_assumed(&est)?,
            _ => invert_qubit(&est)?,
        }
    };
    let result = match &a.target {
        Some(path) => with_target(result, load_target(path)?)?,
        None => result,
    };
    let out = prepare_out(g)?;
    write_json(&out.join("reconstruction.json"), &result)?;
    let cfg = load_config(g)?;
    let mut man = manifest("reconstruct", g, &cfg);
    man.inputs = std::iter::once(a.input.clone()).chain(a.target.clone()).collect();
    man.write()?;
    let flags: Vec<String> = result
        .flags
        .iter()
        .map(|f| serde_json::to_value(f).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
        .collect();
    let summary = match (result.qubit(), result.qudit()) {
        (Some(s), _) => format!("θ = {:.6}, φ = {:.6}, μ = {:.6}", s.theta(), s.phi(), s.mu()),
        (_, Some(s)) => format!("θ = {:?}, φ = {:?}", s.thetas(), s.phis()),
        _ => String::new(),
    };
    let fid = result.fidelity_vs_target.map(|f| format!(", fidelity {f:.6}")).unwrap_or_default();
    say(g, format!("{summary}{fid} [{}]", flags.join(", ")));
    Ok(())
}

fn with_target(result: ReconstructionResult, target: Target) -> Result<ReconstructionResult> {
    let rho: DensityMatrix = match target {
        Target::Qubit(s) => s.density_matrix(),
        Target::Qudit(s) => DensityMatrix::from_pure(&s.amplitudes())?,
    };
    if rho.dim() != result.rho.dim() {
        return Err(CliError::usage(format!(
            "target dimension {} differs from reconstruction dimension {}",
            rho.dim(),
            result.rho.dim()
        )));
    }
    Ok(result.with_target(&rho)?)
}

#[derive(Serialize)]
struct SweepSummary {
    n_points: usize,
    failures: usize,
    mean_fidelity: f64,
    mean_fidelity_mixed: f64,
    calibration: Calibration,
    spec: SweepSpec,
}

pub fn sweep(g: &GlobalArgs, a: &SweepArgs) -> Result<()> {
    let cfg = load_config(g)?;
    let out = prepare_out(g)?.to_path_buf();
    let calibration = match &a.norm_ref {
        Some(p) => read_json(p)?,
        None => calibrate_with_sweep(&cfg, &default_calibration_angles())?,
    };
    write_json(&out.join("calibration.json"), &calibration)?;
    let mut man = manifest("sweep", g, &cfg);
    man.inputs = a.norm_ref.iter().cloned().collect();
    if a.calibrate_only {
        man.write()?;
        say(
            g,
            format!(
                "norm_reference = {:.6}, phase_reference = {:.6}",
                calibration.norm_reference, calibration.phase_reference
            ),
        );
        return Ok(());
    }
    let spec = SweepSpec {
        alpha_step: a.alpha_step,
        beta_step: a.beta_step,
        hwp_only: a.hwp_only,
        ..Default::default()
    };
    if spec.settings().is_empty() {
        return Err(CliError::usage("sweep grid is empty; steps must be positive"));
    }
    let result = run_sweep(&spec, &cfg, &calibration);
    write_text(&out.join("sweep.csv"), &result.to_csv())?;
    let plots = out.join("plots");
    fs::create_dir_all(&plots).map_err(|e| CliError::new(Class::Io, format!("{}: {e}", plots.display())))?;
    for (name, plot) in result.plots() {
        write_text(&plots.join(name), &plot.render())?;
    }
    let summary = SweepSummary {
        n_points: result.points.len(),
        failures: result.failures(),
        mean_fidelity: result.mean_fidelity(),
        mean_fidelity_mixed: result.mean_fidelity_mixed(),
        calibration,
        spec,
    };
    write_json(&out.join("summary.json"), &summary)?;
    man.write()?;
    say(
        g,
        format!(
            "{} settings, mean fidelity {:.6} (mixed {:.6}), {} failures",
            summary.n_points, summary.mean_fidelity, summary.mean_fidelity_mixed, summary.failures
        ),
    );
    Ok(())
}

fn default_bench_states() -> Vec<QubitState> {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};
    [
        (FRAC_PI_2, 0.0, 1.0),
        (FRAC_PI_3, FRAC_PI_4, 0.8),
        (2.0 * FRAC_PI_3, -FRAC_PI_2, 0.5),
        (FRAC_PI_4, 1.0, 1.0),
    ]
    .into_iter()
    .map(|(t, p, m)| QubitState::new(t, p, m).expect("valid state"))
    .collect()
}

pub fn bench(g: &GlobalArgs, a: &BenchArgs) -> Result<()> {
    let cfg = load_config(g)?;
    let states = match &a.states {
        Some(p) => read_json::<Vec<QubitState>>(p)?,
        None => default_bench_states(),
    };
    let budget = ShotBudget::qst(a.shots)?;
    let cmp: Comparison = compare(&states, &budget, &cfg, a.trials, cfg.rng_seed)?;
    let out = prepare_out(g)?;
    write_text(&out.join("comparison.csv"), &cmp.to_csv())?;
    write_text(&out.join("settings.csv"), &cmp.settings_csv())?;
    write_json(&out.join("summary.json"), &cmp)?;
    let mut man = manifest("bench", g, &cfg);
    man.inputs = a.states.iter().cloned().collect();
    man.write()?;
    for r in &cmp.rows {
        say(
            g,
            format!(
                "θ={:.3} φ={:.3} μ={:.3} {} settings={} fidelity {:.6} ± {:.6}",
                r.theta,
                r.phi,
                r.mu,
                r.method.name(),
                r.settings,
                r.fidelity_mean,
                r.fidelity_std
            ),
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct QuditRun {
    state: QuditPureState,
    estimates: Vec<FringeEstimate>,
    reconstruction: ReconstructionResult,
    fidelity: f64,
}

#[derive(Serialize)]
struct QuditDemoSummary {
    dim: usize,
    calibration: Calibration,
    mean_fidelity: f64,
    runs: Vec<QuditRun>,
}

pub fn qudit_demo(g: &GlobalArgs, a: &QuditDemoArgs) -> Result<()> {
    use rand::SeedableRng;

    let cfg = load_config(g)?;
    let states = match &a.qudit_file {
        Some(p) => vec![read_json::<QuditPureState>(p)?],
        None => {
            if a.dim < 2 {
                return Err(CliError::usage("--dim must be at least 2"));
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, u64::MAX));
            (0..a.count)
                .map(|_| QuditPureState::random(a.dim, &mut rng))
                .collect::<std::result::Result<Vec<_>, _>>()?
        }
    };
    let calibration = if a.ideal_calibration {
        ideal_calibration(&cfg)
    } else {
        calibrate_with_sweep(&cfg, &default_calibration_angles())?
    };
    let mut runs = Vec::with_capacity(states.len());
    for (i, state) in states.into_iter().enumerate() {
        let run_cfg = InterferometerConfig {
            rng_seed: derive_seed(cfg.rng_seed, i as u64),
            ..cfg.clone()
        };
        let (estimates, reconstruction) = measure_qudit(&state, &run_cfg, &calibration)?;
        let recovered = reconstruction.qudit().expect("qudit reconstruction").amplitudes();
        let fidelity = pure_fidelity(&recovered, &state.amplitudes())?;
        say(g, format!("state {i}: fidelity {fidelity:.6}"));
        runs.push(QuditRun {
            state,
            estimates,
            reconstruction,
            fidelity,
        });
    }
    let mean_fidelity = runs.iter().map(|r| r.fidelity).sum::<f64>() / runs.len().max(1) as f64;
    let out = prepare_out(g)?;
    let summary = QuditDemoSummary {
        dim: runs.first().map_or(a.dim, |r| r.state.dim()),
        calibration,
        mean_fidelity,
        runs,
    };
    write_json(&out.join("qudit_demo.json"), &summary)?;
    let mut man = manifest("qudit-demo", g, &cfg);
    man.inputs = a.qudit_file.iter().cloned().collect();
    man.write()?;
    say(g, format!("mean fidelity {mean_fidelity:.6}"));
    Ok(())
}
