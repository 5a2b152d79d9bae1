//! Built-in starting points. Each preset is an ordinary configuration
//! document; files and `--set` overrides are layered on top of it.

pub const NAMES: [&str; 5] = ["reference", "reversal", "desk-scale", "free-particle", "demon-window"];

/// Atom moving along the axis of a 100 µm Rayleigh-length beam at 2 km/s,
/// with a 20% Doppler shift. The quantum block is the full-scale run and is
/// expensive (minutes and several GB).
const REFERENCE: &str = r#"
preset = "reference"
detuning = "2pi*5e9"

[beam]
wavelength = 2e-6
rayleigh_length = 100e-6
gouy = false

[atom]
mass = 3.3e-31
coupling_ratio = 0.2

[classical]
position = -200e-6
velocity = 2000.0
model = "dipole-only"

[quantum]
r_min = -1000e-6
r_max = 1000e-6
n_points = 65536
position = -200e-6
velocity = 2000.0
sigma = 5e-6
t_end = 240e-9
observer_stride = 8
matched_radius_fraction = 0.8
"#;

/// As `reference` with M₀ scaled by √(2π), which lifts the barrier above
/// the initial kinetic energy so that the left-incident atom turns round.
const REVERSAL: &str = r#"
preset = "reversal"

[atom]
coupling_ratio = 0.5013256549262001
"#;

/// Rayleigh length 20 µm, start at −40 µm, same M₀/ħΔ and δω_D/Δ.
const DESK_SCALE: &str = r#"
preset = "desk-scale"

[beam]
rayleigh_length = 20e-6

[classical]
position = -40e-6

[quantum]
r_min = -160e-6
r_max = 160e-6
n_points = 8192
position = -40e-6
velocity = 2000.0
sigma = 5e-6
t_end = 46e-9
observer_stride = 4
gouy = true
"#;

/// `desk-scale` with the coupling switched off.
const FREE_PARTICLE: &str = r#"
preset = "free-particle"

[atom]
coupling_ratio = 0.0

[quantum]
t_end = 30e-9
"#;

/// Thermal chambers either side of the `reference` beam, k_B T equal to
/// the barrier height, energies restricted to 0.5–1.5 barrier heights.
const DEMON_WINDOW: &str = r#"
preset = "demon-window"

[ensemble]
temperature = 9.598486140851266e-3
n_atoms = 10000
seed = 42
models = ["dipole-only", "dipole-plus-phase"]
window_over_barrier = [0.5, 1.5]
"#;

/// Layers that make up `name`, base first.
fn layers(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "reference" => &[REFERENCE],
        "reversal" => &[REFERENCE, REVERSAL],
        "desk-scale" => &[REFERENCE, DESK_SCALE],
        "free-particle" => &[REFERENCE, DESK_SCALE, FREE_PARTICLE],
        "demon-window" => &[REFERENCE, DEMON_WINDOW],
        _ => return None,
    })
}

/// The preset as a single TOML document.
pub fn source(name: &str) -> Option<String> {
    let mut merged = toml::Table::new();
    for text in layers(name)? {
        let t: toml::Table = toml::from_str(text).expect("built-in presets are valid TOML");
        crate::config::merge(&mut merged, t);
    }
    Some(toml::to_string(&merged).expect("a table always serialises"))
}
