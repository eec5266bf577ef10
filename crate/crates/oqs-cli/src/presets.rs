//! One preset per reproduced figure, with the caption's parameters.
//! Time windows and sweep ranges are not given in captions; they are
//! chosen to cover the plotted features.

use std::path::Path;

use crate::config::{ExperimentConfig, ValidationError};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Configuration text without the output key.
    pub body: &'static str,
}

impl Preset {
    pub fn config_text(&self, out_dir: &Path) -> String {
        let out = out_dir.join(format!("{}.csv", self.name));
        format!("# {}\n{}output = {}\n", self.description, self.body, out.display())
    }

    pub fn config(&self, out_dir: &Path) -> Result<ExperimentConfig, ValidationError> {
        ExperimentConfig::parse(&self.config_text(out_dir))
    }
}

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

macro_rules! preset {
    ($name:literal, $desc:literal, $body:literal) => {
        Preset { name: $name, description: $desc, body: $body }
    };
}

pub static PRESETS: &[Preset] = &[
    // --- central qubit in a spin environment ---------------------------------
    preset!("fig-weakcouplingspin", "p_x(t), weak coupling", "[spinspin_bloch]
n = 50
g = 0.01
eps0 = 4
eps = 2
eps_env = 1
delta0 = 1
beta = 1
"),
    preset!("fig-midcoupling", "p_x(t), g = 0.05", "[spinspin_bloch]
n = 50
g = 0.05
eps0 = 4
eps = 2
eps_env = 1
delta0 = 1
beta = 1
"),
    preset!("fig-comparison", "p_x(t), g = 0.1", "[spinspin_bloch]
n = 50
g = 0.1
eps0 = 4
eps = 2
eps_env = 1
delta0 = 1
beta = 1
"),
    preset!("fig-hightemp", "p_x(t), g = 0.05 at beta = 0.1", "[spinspin_bloch]
n = 50
g = 0.05
eps0 = 4
eps = 2
eps_env = 1
delta0 = 1
beta = 0.1
"),
    preset!("fig-lowtemp", "p_x(t), g = 1 at beta = 10", "[spinspin_bloch]
n = 50
g = 1
eps0 = 4
eps = 2
eps_env = 1
delta0 = 1
beta = 10
"),
    preset!("fig-environment", "p_x(t), N = 250", "[spinspin_bloch]
n = 250
g = 0.01
eps0 = 4
eps = 2
eps_env = 1
delta0 = 1
beta = 1
"),
    preset!("fig-Delta", "p_x(t), Delta0 = 10, g = 0.05", "[spinspin_bloch]
n = 50
g = 0.05
eps0 = 4
eps = 2
eps_env = 1
delta0 = 10
beta = 1
"),
    preset!("fig-strongcoupling", "p_x(t), Delta0 = 10, g = 1", "[spinspin_bloch]
n = 50
g = 1
eps0 = 4
eps = 2
eps_env = 1
delta0 = 10
beta = 1
"),
    preset!("fig-weakenv", "p_x(t), beta = 10, g = 1, eps_i = 0.01", "[spinspin_bloch]
n = 50
g = 1
eps0 = 4
eps = 2
eps_env = 0.01
delta0 = 1
beta = 10
"),
    preset!("fig-lowInterspin", "p_x(t), strong coupling with interacting environment spins", "[spinspin_bloch]
n = 10
g = 0.5
eps0 = 5
eps = 2
eps_env = 1
delta0 = 1
alpha = 0.1
beta = 1
"),
    preset!("fig-2QweakCoupling", "two-qubit concurrence, weak coupling", "[spinspin_concurrence]
n = 50
g = 0.05
eps0 = 5
eps = 2
eps_env = 1
delta0 = 1
kappa = 0
beta = 1
"),
    preset!("fig-2Qlowtemp", "two-qubit concurrence, beta = 3, g = 0.5", "[spinspin_concurrence]
n = 50
g = 0.5
eps0 = 5
eps = 2
eps_env = 1
delta0 = 1
kappa = 0
beta = 3
"),
    preset!("fig-qubitsinteraction", "two-qubit concurrence, kappa = 0.5", "[spinspin_concurrence]
n = 50
g = 0.05
eps0 = 5
eps = 2
eps_env = 1
delta0 = 1
kappa = 0.5
beta = 1
"),
    // --- large spin: exact pure dephasing and the correlated master equation --
    preset!("fig-Puredephasing-N=1", "j_x(t), exact vs master equation, N = 1", "[dephasing_jx]
n = 1
eps0 = 4
eps = 4
coupling = 0.05
s = 1
omega_c = 5
beta = 1
t_end = 3
t_points = 301
"),
    preset!("fig-Puredephasing-N=4", "j_x(t), exact vs master equation, N = 4", "[dephasing_jx]
n = 4
eps0 = 4
eps = 4
coupling = 0.05
s = 1
omega_c = 5
beta = 1
t_end = 3
t_points = 301
"),
    preset!("fig-Puredephasing-N=10", "j_x(t), exact vs master equation, N = 10", "[dephasing_jx]
n = 10
eps0 = 4
eps = 4
coupling = 0.05
s = 1
omega_c = 5
beta = 1
t_end = 3
t_points = 301
"),
    preset!("fig-Beyond-PD-N=2", "j_x(t) beyond pure dephasing, N = 2", "[corrme_jx]
n = 2
eps0 = 4
eps = 2.5
delta0 = 0.5
delta = 0.5
coupling = 0.05
s = 1
omega_c = 5
beta = 1
t_end = 5
t_points = 501
"),
    preset!("fig-Beyond-PD-N=4", "j_x(t) beyond pure dephasing, N = 4", "[corrme_jx]
n = 4
eps0 = 4
eps = 2.5
delta0 = 0.5
delta = 0.5
coupling = 0.05
s = 1
omega_c = 5
beta = 1
t_end = 5
t_points = 501
"),
    preset!("fig-Beyond-PD-N=10", "j_x(t) beyond pure dephasing, N = 10", "[corrme_jx]
n = 10
eps0 = 4
eps = 2.5
delta0 = 0.5
delta = 0.5
coupling = 0.05
s = 1
omega_c = 5
beta = 1
t_end = 5
t_points = 501
"),
    preset!("fig-Beta=0.5", "j_x(t), N = 10 at beta = 0.5", "[corrme_jx]
n = 10
eps0 = 4
eps = 2.5
delta0 = 0.5
delta = 0.5
coupling = 0.05
s = 1
omega_c = 5
beta = 0.5
t_end = 5
t_points = 501
"),
    preset!("fig-Beta=1.5", "j_x(t), N = 10 at beta = 1.5", "[corrme_jx]
n = 10
eps0 = 4
eps = 2.5
delta0 = 0.5
delta = 0.5
coupling = 0.05
s = 1
omega_c = 5
beta = 1.5
t_end = 5
t_points = 501
"),
    preset!("fig-Jx2-N=10", "j_x^(2)(t), N = 10", "[corrme_jx2]
n = 10
eps0 = 4
eps = 2.5
delta0 = 0.5
delta = 0.5
coupling = 0.05
s = 1
omega_c = 5
beta = 1
t_end = 5
t_points = 501
"),
    preset!("fig-subOhmic1", "j_x(t), sub-Ohmic s = 0.5, N = 4", "[corrme_jx]
n = 4
eps0 = 4
eps = 2.5
delta0 = 0.5
delta = 0.5
coupling = 0.05
s = 0.5
omega_c = 5
beta = 1
t_end = 5
t_points = 501
"),
    preset!("fig-subOhmic2", "j_x(t), sub-Ohmic s = 0.5, N = 10", "[corrme_jx]
n = 10
eps0 = 4
eps = 2.5
delta0 = 0.5
delta = 0.5
coupling = 0.05
s = 0.5
omega_c = 5
beta = 1
t_end = 5
t_points = 501
"),
    preset!("fig-spinenv1", "j_x(t), spin environment, N = 4", "[corrme_jx]
n = 4
eps0 = 4
eps = 2.5
delta0 = 0.5
delta = 0.5
bath_kind = spin
coupling = 0.05
s = 1
omega_c = 5
beta = 1
t_end = 5
t_points = 501
"),
    preset!("fig-spinenv2", "j_x(t), spin environment, N = 10", "[corrme_jx]
n = 10
eps0 = 4
eps = 2.5
delta0 = 0.5
delta = 0.5
bath_kind = spin
coupling = 0.05
s = 1
omega_c = 5
beta = 1
t_end = 5
t_points = 501
"),
    preset!("fig-spinone", "j_x(t), N = 2, bias ramps t_eps -> 0, 0.1, 1", "[corrme_jx]
n = 2
eps0 = 4
eps = 2
delta0 = 1
delta = 1
coupling = 0.05
s = 1
omega_c = 5
beta = 1
t_eps = 0, 0.1, 1
t_end = 5
t_points = 501
"),
    // --- qubit probes: optimized QFI ------------------------------------------
    preset!("fig-weakcoupling", "optimized QFI about omega_c, s = 0.5, G = 0.01, T = 0", "[probe_sweep]
param = omega_c
sweep_start = 1
sweep_end = 10
sweep_points = 19
omega0 = 1
coupling = 0.01
s = 0.5
beta = inf
"),
    preset!("fig-StrongCoupling", "optimized QFI about omega_c, s = 0.5, G = 1, T = 0", "[probe_sweep]
param = omega_c
sweep_start = 1
sweep_end = 10
sweep_points = 19
omega0 = 1
coupling = 1
s = 0.5
beta = inf
"),
    preset!("fig-ohmic", "optimized QFI about omega_c, Ohmic, G = 0.01, T = 0 (main panel)", "[probe_sweep]
param = omega_c
sweep_start = 1
sweep_end = 10
sweep_points = 19
omega0 = 1
coupling = 0.01
s = 1
beta = inf
"),
    preset!("fig-Super1", "optimized QFI about omega_c, super-Ohmic s = 2, G = 2, T = 0", "[probe_sweep]
param = omega_c
sweep_start = 1
sweep_end = 10
sweep_points = 19
omega0 = 1
coupling = 2
s = 2
beta = inf
"),
    preset!("fig-HvsA", "optimized QFI about G, sub-Ohmic s = 0.1, omega_c = 5, T = 0", "[probe_sweep]
param = coupling
sweep_start = 0.05
sweep_end = 2
sweep_points = 40
omega0 = 1
s = 0.1
omega_c = 5
beta = inf
"),
    preset!("fig-GOhmic", "optimized QFI about G, Ohmic, omega_c = 5, T = 0", "[probe_sweep]
param = coupling
sweep_start = 0.05
sweep_end = 2
sweep_points = 40
omega0 = 1
s = 1
omega_c = 5
beta = inf
"),
    preset!("fig-GSuper", "optimized QFI about G, super-Ohmic s = 2, omega_c = 5, T = 0", "[probe_sweep]
param = coupling
sweep_start = 0.05
sweep_end = 2
sweep_points = 40
omega0 = 1
s = 2
omega_c = 5
beta = inf
"),
    preset!("fig-TempAll", "optimized QFI about T for s = 2, 1, 0.5; omega_c = 5, G = 1", "[probe_sweep]
param = temperature
sweep_start = 1
sweep_end = 10
sweep_points = 10
omega0 = 1
coupling = 1
s = 2, 1, 0.5
omega_c = 5
"),
    preset!("fig-QC-OTC", "QFI and CFI about G, omega_c = 5, s = 0.5, T = 0 (main panel)", "[probe_sweep]
param = coupling
sweep_start = 0.05
sweep_end = 2
sweep_points = 40
omega0 = 1
s = 0.5
omega_c = 5
beta = inf
"),
    // --- driven qubit: work statistics ------------------------------------------
    preset!("fig-c-weak", "P(n) at Delta t = 0.1, 0.5, 1, 5; G = 0.1", "[fcs_workdist]
eps = 5
omega_l = 0
delta = 0.01
coupling = 0.1
s = 1
omega_c = 5
beta = 1
delta_t = 0.1, 0.5, 1, 5
"),
    preset!("fig-c-strong", "P(n), G = 0.5", "[fcs_workdist]
eps = 5
omega_l = 0
delta = 0.01
coupling = 0.5
s = 1
omega_c = 5
beta = 1
delta_t = 0.1, 0.5, 1, 5
"),
    preset!("fig-c-bias", "P(n), eps = 2", "[fcs_workdist]
eps = 2
omega_l = 0
delta = 0.01
coupling = 0.1
s = 1
omega_c = 5
beta = 1
delta_t = 0.1, 0.5, 1, 5
"),
    preset!("fig-c-temp", "P(n), beta = 0.1", "[fcs_workdist]
eps = 5
omega_l = 0
delta = 0.01
coupling = 0.1
s = 1
omega_c = 5
beta = 0.1
delta_t = 0.1, 0.5, 1, 5
"),
];
