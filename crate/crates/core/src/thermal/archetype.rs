use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::{BilinearBuildingModel, LtvBuildingModel, UvTerm};
use crate::error::{CoreError, Result};

pub const HEATING: usize = 0;
pub const COOLING: usize = 1;
pub const BLINDS: usize = 2;

pub const AMBIENT: usize = 0;
pub const SOLAR: usize = 1;
pub const GAINS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HvacSystem {
    /// Radiators and cooled ceilings.
    A,
    /// Thermally activated building systems in the slab.
    B,
}

/// RC-ladder constants per m² of floor area. Capacitances in J/(m²K),
/// conductances in W/(m²K).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeParams {
    pub system: HvacSystem,
    pub c_air: f64,
    pub c_surface: f64,
    pub c_core: f64,
    pub c_wall: f64,
    pub h_air_surface: f64,
    pub h_surface_core: f64,
    /// Windows plus the constant fresh-air flow.
    pub h_window: f64,
    pub h_air_wall: f64,
    pub h_wall_internal: f64,
    pub h_wall_ambient: f64,
    /// Share of global solar radiation entering through open blinds.
    pub solar_window: f64,
    /// Share absorbed by the opaque envelope.
    pub solar_opaque: f64,
    pub gain_air_share: f64,
    pub cop_heating: f64,
    pub cop_cooling: f64,
    pub heating_max: f64,
    pub cooling_max: f64,
    pub floor_area: f64,
    /// Internal gains during occupied hours, W/m².
    pub gain_occupied: f64,
    pub gain_unoccupied: f64,
}

impl ArchetypeParams {
    /// Constants for the six reference buildings: heavy or light envelope
    /// (`heavy`), high or low window share (`windows_high`) and high or low
    /// internal gains (`gains_high`).
    pub fn reference(system: HvacSystem, heavy: bool, windows_high: bool, gains_high: bool) -> Self {
        let tabs = if system == HvacSystem::B { 1.6 } else { 1.0 };
        ArchetypeParams {
            system,
            c_air: 40e3,
            c_surface: if heavy { 70e3 } else { 35e3 },
            c_core: if heavy { 280e3 } else { 140e3 } * tabs,
            c_wall: if heavy { 220e3 } else { 90e3 },
            h_air_surface: 9.0,
            h_surface_core: if system == HvacSystem::B { 7.0 } else { 6.0 },
            h_window: if windows_high { 0.45 } else { 0.3 } + 0.2,
            h_air_wall: 3.0,
            h_wall_internal: 2.0,
            h_wall_ambient: 0.25,
            solar_window: if windows_high { 0.09 } else { 0.04 },
            solar_opaque: 0.006,
            gain_air_share: 0.6,
            cop_heating: if system == HvacSystem::A { 3.0 } else { 3.4 },
            cop_cooling: if system == HvacSystem::A { 3.5 } else { 3.4 },
            heating_max: if system == HvacSystem::B { 40.0 } else { 27.0 },
            cooling_max: 32.0,
            floor_area: 15000.0,
            gain_occupied: if gains_high { 14.0 } else { 8.0 },
            gain_unoccupied: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.c_air,
            self.c_surface,
            self.c_core,
            self.c_wall,
            self.h_air_surface,
            self.h_surface_core,
            self.h_window,
            self.h_air_wall,
            self.h_wall_internal,
            self.h_wall_ambient,
            self.cop_heating,
            self.cop_cooling,
            self.heating_max,
            self.cooling_max,
            self.floor_area,
        ];
        if positive.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(CoreError::InvalidParameter("archetype constants must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gain_air_share) {
            return Err(CoreError::InvalidParameter("gain_air_share must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Constants of a reference archetype id (`A1` … `B3`).
pub fn archetype_params(id: &str) -> Result<ArchetypeParams> {
    use HvacSystem::*;
    let p = match id {
        "A1" => ArchetypeParams::reference(A, true, true, true),
        "A2" => ArchetypeParams::reference(A, true, false, false),
        "A3" => ArchetypeParams::reference(A, false, false, false),
        "B1" => ArchetypeParams::reference(B, true, true, true),
        "B2" => ArchetypeParams::reference(B, true, false, false),
        "B3" => ArchetypeParams::reference(B, false, false, false),
        _ => return Err(CoreError::UnknownArchetype(id.to_string())),
    };
    Ok(p)
}

pub const ARCHETYPE_IDS: [&str; 6] = ["A1", "A2", "A3", "B1", "B2", "B3"];

/// Parses a TOML table of named archetypes, e.g.
///
/// ```toml
/// [A1]
/// system = "a"
/// c_air = 40000.0
/// # ...
/// ```
pub fn load_archetypes(toml_text: &str) -> Result<BTreeMap<String, ArchetypeParams>> {
    let lib: BTreeMap<String, ArchetypeParams> =
        toml::from_str(toml_text).map_err(|e| CoreError::Config(e.to_string()))?;
    for p in lib.values() {
        p.validate()?;
    }
    Ok(lib)
}

struct Network {
    cap: Vec<f64>,
    links: Vec<(usize, usize, f64)>,
    ambient_links: Vec<(usize, f64)>,
    air: usize,
    surface: usize,
    core: usize,
    outer_wall: usize,
}

fn series(a: f64, b: f64) -> f64 {
    a * b / (a + b)
}

fn network(p: &ArchetypeParams, order: usize) -> Network {
    match order {
        2 => {
            // surface lumped into the core, wall lumped into the envelope
            let env = p.h_window + series(p.h_air_wall, p.h_wall_ambient);
            Network {
                cap: vec![p.c_air, p.c_surface + p.c_core],
                links: vec![(0, 1, series(p.h_air_surface, p.h_surface_core))],
                ambient_links: vec![(0, env)],
                air: 0,
                surface: 1,
                core: 1,
                outer_wall: 0,
            }
        }
        3 => {
            let env = p.h_window + series(p.h_air_wall, p.h_wall_ambient);
            Network {
                cap: vec![p.c_air, p.c_surface, p.c_core],
                links: vec![(0, 1, p.h_air_surface), (1, 2, p.h_surface_core)],
                ambient_links: vec![(0, env)],
                air: 0,
                surface: 1,
                core: 2,
                outer_wall: 0,
            }
        }
        _ => {
            let layers = order - 3;
            let mut cap = vec![p.c_air, p.c_surface, p.c_core];
            cap.extend(std::iter::repeat(p.c_wall / layers as f64).take(layers));
            let mut links = vec![(0, 1, p.h_air_surface), (1, 2, p.h_surface_core), (0, 3, p.h_air_wall)];
            let per_layer = p.h_wall_internal * (layers.max(2) - 1) as f64;
            for k in 0..layers.saturating_sub(1) {
                links.push((3 + k, 4 + k, per_layer));
            }
            Network {
                cap,
                links,
                ambient_links: vec![(0, p.h_window), (order - 1, p.h_wall_ambient)],
                air: 0,
                surface: 1,
                core: 2,
                outer_wall: order - 1,
            }
        }
    }
}

/// Exact zero-order-hold discretization of `ẋ = Ac x + Bn q` over `h`
/// seconds; returns `(A_d, Γ)` with `Γ = ∫₀ʰ e^{Ac s} ds · Bn`.
pub fn discretize(ac: &DMatrix<f64>, bn: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = ac.nrows();
    let m = bn.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(ac * h));
    aug.view_mut((0, n), (n, m)).copy_from(&(bn * h));
    let e = aug.exp();
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned())
}

/// Bilinear archetype model: the blinds act through a blinds × solar product.
pub fn make_bilinear_from_params(p: &ArchetypeParams, order: usize, step_minutes: u32) -> Result<BilinearBuildingModel> {
    if order < 2 {
        return Err(CoreError::InvalidParameter(format!("model order must be at least 2, got {order}")));
    }
    if step_minutes == 0 || 60 % step_minutes != 0 {
        return Err(CoreError::InvalidParameter(format!("step of {step_minutes} min does not divide an hour")));
    }
    p.validate()?;
    let net = network(p, order);
    let n = order;
    let mut ac = DMatrix::zeros(n, n);
    for &(i, j, h) in &net.links {
        ac[(i, j)] += h / net.cap[i];
        ac[(j, i)] += h / net.cap[j];
        ac[(i, i)] -= h / net.cap[i];
        ac[(j, j)] -= h / net.cap[j];
    }
    for &(i, h) in &net.ambient_links {
        ac[(i, i)] -= h / net.cap[i];
    }
    let bn = DMatrix::from_diagonal(&DVector::from_iterator(n, net.cap.iter().map(|c| 1.0 / c)));
    let (ad, gamma) = discretize(&ac, &bn, step_minutes as f64 * 60.0);

    let (heat_node, cool_node) = match p.system {
        HvacSystem::A => (net.air, net.surface),
        HvacSystem::B => (net.core, net.core),
    };
    let mut b = DMatrix::zeros(n, 3);
    b.set_column(HEATING, &gamma.column(heat_node));
    b.set_column(COOLING, &(-gamma.column(cool_node)));
    let mut e = DMatrix::zeros(n, 3);
    for &(i, h) in &net.ambient_links {
        e.set_column(AMBIENT, &(e.column(AMBIENT) + gamma.column(i) * h));
    }
    e.set_column(SOLAR, &(gamma.column(net.outer_wall) * p.solar_opaque));
    let gains_col = gamma.column(net.air) * p.gain_air_share + gamma.column(net.surface) * (1.0 - p.gain_air_share);
    e.set_column(GAINS, &gains_col);
    let mut c = DMatrix::zeros(1, n);
    c[(0, net.air)] = 1.0;

    let nominal = LtvBuildingModel {
        a: ad,
        b: vec![b],
        e,
        c,
        d: vec![DMatrix::zeros(1, 3)],
        f: DMatrix::zeros(1, 3),
        u_min: DVector::from_vec(vec![0.0, 0.0, 0.0]),
        u_max: DVector::from_vec(vec![p.heating_max, p.cooling_max, 1.0]),
        reserve_actuators: vec![HEATING, COOLING],
        actuator_sign: vec![1.0, -1.0],
        cop: vec![p.cop_heating, p.cop_cooling],
        input_cop: vec![p.cop_heating, p.cop_cooling, 0.0],
        floor_area: p.floor_area,
        step_minutes,
        input_names: vec!["heating".into(), "cooling".into(), "blinds".into()],
    };
    let model = BilinearBuildingModel {
        nominal,
        gamma,
        uv_terms: vec![UvTerm { input: BLINDS, disturbance: SOLAR, node: net.air, coeff: p.solar_window }],
        xu_terms: vec![],
    };
    model.validate()?;
    Ok(model)
}

pub fn make_bilinear_archetype(id: &str, order: usize, step_minutes: u32) -> Result<BilinearBuildingModel> {
    make_bilinear_from_params(&archetype_params(id)?, order, step_minutes)
}

/// Linear archetype model with blinds closed to solar gains (the blinds
/// column only appears once a solar trace is folded in).
pub fn make_archetype(id: &str, order: usize, step_minutes: u32) -> Result<LtvBuildingModel> {
    Ok(make_bilinear_archetype(id, order, step_minutes)?.nominal)
}
