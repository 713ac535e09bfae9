//! Budget-aware inference planning.
//!
//! Given a volume shape, a window size, and a hardware profile, the
//! planner counts windows at the initial overlap, bounds the affordable
//! step count by `budget / (latency · windows)`, picks the largest trained
//! step count under the bound, and finally searches for the largest
//! overlap that still fits the budget at the chosen step count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::StepSet;

/// Measured or assumed per-step latency and the total time budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HardwareProfile {
    /// Seconds per denoising step on one window.
    pub time_per_infer_s: f64,
    /// Total wall-clock budget in seconds.
    pub total_budget_s: f64,
}

impl Default for HardwareProfile {
    fn default() -> Self {
        // T4-class latency under a 15 minute cap.
        Self {
            time_per_infer_s: 0.433,
            total_budget_s: 900.0,
        }
    }
}

/// Planner output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetPlan {
    pub n_windows: usize,
    /// Real-valued step bound before snapping to the trained set.
    pub t_max_real: f64,
    /// Chosen step count (member of the trained set).
    pub t_selected: usize,
    /// Overlap after re-refinement at the chosen step count.
    pub overlap_final: f64,
    /// Windows · steps · latency at the final overlap.
    pub est_runtime_s: f64,
}

const OVERLAP_GRID_MAX: f64 = 0.95;

fn check_window(volume: [usize; 3], window: [usize; 3]) -> Result<()> {
    if window.iter().zip(&volume).any(|(r, i)| r > i) || window.contains(&0) {
        return Err(Error::WindowLargerThanVolume { window, volume });
    }
    Ok(())
}

fn check_overlap(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) || !p.is_finite() {
        return Err(Error::InvalidOverlap { p });
    }
    Ok(())
}

/// Number of sliding windows needed to cover `volume` with windows of size
/// `window` at overlap fraction `p`:
/// ∏ᵢ (⌈(Iᵢ − Rᵢ)/(Rᵢ(1−p))⌉ + 1).
pub fn n_windows(volume: [usize; 3], window: [usize; 3], p: f64) -> Result<usize> {
    check_window(volume, window)?;
    check_overlap(p)?;
    let mut count = 1usize;
    for i in 0..3 {
        let span = (volume[i] - window[i]) as f64;
        let stride = window[i] as f64 * (1.0 - p);
        count *= (span / stride).ceil() as usize + 1;
    }
    Ok(count)
}

/// Real-valued bound on the affordable step count:
/// budget / (latency · windows).
pub fn max_steps(hw: &HardwareProfile, n_windows: usize) -> f64 {
    hw.total_budget_s / (hw.time_per_infer_s * n_windows as f64)
}

/// Largest trained step count not exceeding `t_max`.
pub fn select_steps(t_max: f64, steps: &StepSet) -> Result<usize> {
    let best = steps
        .values()
        .iter()
        .rev()
        .find(|&&s| s as f64 <= t_max)
        .copied();
    best.ok_or(Error::BudgetInfeasible {
        t_max,
        min_step: steps.min(),
    })
}

/// Largest overlap on the grid {p_min, p_min + p_grid, …, 0.95} whose
/// window count still fits the budget at `t_selected` steps.
pub fn refine_overlap(
    volume: [usize; 3],
    window: [usize; 3],
    t_selected: usize,
    hw: &HardwareProfile,
    p_min: f64,
    p_grid: f64,
) -> Result<f64> {
    check_window(volume, window)?;
    check_overlap(p_min)?;
    let fits = |p: f64| -> Result<bool> {
        let n = n_windows(volume, window, p)?;
        Ok(n as f64 * t_selected as f64 * hw.time_per_infer_s <= hw.total_budget_s)
    };
    if !fits(p_min)? {
        return Err(Error::InfeasibleAtMinimumOverlap { p_min });
    }
    let mut best = p_min;
    let mut k = 1usize;
    loop {
        let p = p_min + k as f64 * p_grid;
        if p > OVERLAP_GRID_MAX + 1e-12 {
            break;
        }
        if fits(p)? {
            best = p;
        }
        k += 1;
    }
    Ok(best)
}

/// Full planning pass. `p_init` must be at least 0.5: lower overlaps
/// produce visible seams, so the plan contract keeps them out.
pub fn plan(
    volume: [usize; 3],
    window: [usize; 3],
    hw: &HardwareProfile,
    steps: &StepSet,
    p_init: f64,
) -> Result<BudgetPlan> {
    check_overlap(p_init)?;
    if p_init < 0.5 {
        return Err(Error::InvalidOverlap { p: p_init });
    }
    let n0 = n_windows(volume, window, p_init)?;
    let t_max_real = max_steps(hw, n0);
    let t_selected = select_steps(t_max_real, steps)?;
    let overlap_final = refine_overlap(volume, window, t_selected, hw, p_init, 0.01)?;
    let n_final = n_windows(volume, window, overlap_final)?;
    Ok(BudgetPlan {
        n_windows: n_final,
        t_max_real,
        t_selected,
        overlap_final,
        est_runtime_s: n_final as f64 * t_selected as f64 * hw.time_per_infer_s,
    })
}
