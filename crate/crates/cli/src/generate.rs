use std::path::PathBuf;

use clap::{Args, ValueEnum};
use gil_core::data::{generate_spring_dataset, write_dataset, GenerateConfig, Task};

use crate::manifest::Manifest;
use crate::{resolve_seed, usage, CliResult};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum System {
    Spring,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Newtonian,
    Hamiltonian,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Newtonian => Task::Newtonian,
            TaskArg::Hamiltonian => Task::Hamiltonian,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "spring")]
    system: System,
    #[arg(long, default_value_t = 10)]
    particles: usize,
    /// Recorded integration steps per system.
    #[arg(long, default_value_t = 500)]
    steps: usize,
    /// Independent initial conditions; the dataset has `systems * steps` records.
    #[arg(long, default_value_t = 1)]
    systems: usize,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, value_enum, default_value = "newtonian")]
    task: TaskArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Side of the cube initial positions are drawn from.
    #[arg(long, default_value_t = 2.0)]
    box_side: f64,
    /// Standard deviation of initial velocity components.
    #[arg(long, default_value_t = 0.5)]
    velocity_sigma: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write `<out>.manifest.json`.
    #[arg(long)]
    manifest: bool,
}

pub fn run(a: GenerateArgs) -> CliResult<()> {
    if a.particles == 0 || a.steps == 0 || a.systems == 0 {
        return Err(usage("--particles, --steps and --systems must be positive"));
    }
    if !(a.dt > 0.0) || !(a.box_side > 0.0) || !(a.velocity_sigma >= 0.0) {
        return Err(usage("--dt and --box-side must be positive, --velocity-sigma non-negative"));
    }
    let seed = resolve_seed(a.seed)?;
    let cfg = GenerateConfig {
        particles: a.particles,
        systems: a.systems,
        steps: a.steps,
        dt: a.dt,
        task: a.task.into(),
        seed,
        box_side: a.box_side,
        velocity_sigma: a.velocity_sigma,
    };
    let ds = generate_spring_dataset(&cfg)?;
    write_dataset(&ds, &a.out)?;
    log::info!("wrote {} records to {}", ds.records.len(), a.out.display());
    if a.manifest {
        let mut m = Manifest::new("generate", Some(seed));
        m.output(&a.out)?;
        let mut path = a.out.clone().into_os_string();
        path.push(".manifest.json");
        m.write(&PathBuf::from(path))?;
    }
    Ok(())
}
