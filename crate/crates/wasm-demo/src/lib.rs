//! Browser demo: run small testing campaigns in the microworld and render
//! their figures as SVG, all client-side on one static page.

use drivelab_core::agents::KeyPrecision;
use drivelab_core::campaign::{run_campaign, CampaignConfig, CampaignMode, Technique};
use drivelab_core::microworld::{Route, RouteId};
use drivelab_core::render::{growth_svg, timeline_svg, trajectories_svg, BandSeries, GrowthSeries};
use wasm_bindgen::prelude::*;

fn parse_route(route: &str) -> Result<RouteId, String> {
    route.parse::<RouteId>().map_err(|e| e.to_string())
}

/// Bird's-eye SVG of a built-in route: lane boundaries, obstacles, start
/// marker.
#[wasm_bindgen]
pub fn route_svg(route: &str) -> Result<String, JsValue> {
    route_svg_impl(route).map_err(|e| JsValue::from_str(&e))
}

fn route_svg_impl(route: &str) -> Result<String, String> {
    let id = parse_route(route)?;
    let route = Route::builtin(id);
    Ok(trajectories_svg(&route, &[], id.name()))
}

/// Run a short campaign (one repetition) in the browser and return a JSON
/// object with a failure-trajectory SVG, a violations-over-time SVG, and
/// summary numbers.
#[wasm_bindgen]
pub fn run_demo(technique: &str, route: &str, budget_steps: u32, seed: u32) -> Result<String, JsValue> {
    run_demo_impl(technique, route, budget_steps, seed).map_err(|e| JsValue::from_str(&e))
}

fn run_demo_impl(
    technique: &str,
    route: &str,
    budget_steps: u32,
    seed: u32,
) -> Result<String, String> {
    let technique: Technique = technique.parse().map_err(|e: drivelab_core::Error| e.to_string())?;
    let route_id = parse_route(route)?;
    let budget = (budget_steps as u64).clamp(2_000, 120_000);
    let cfg = CampaignConfig {
        technique,
        route: route_id,
        mode: CampaignMode::Extension,
        budget_steps: budget,
        episode_timeout: 400,
        repetitions: 1,
        base_seed: seed as u64,
        jobs: 1,
        ..CampaignConfig::default()
    };
    let result = run_campaign(&cfg).map_err(|e| e.to_string())?;
    let rep = &result.reps[0];
    let route = Route::builtin(route_id);
    let trajectories: Vec<Vec<(f64, f64)>> = rep
        .failure_trajectories
        .iter()
        .map(|(_, _, pts)| pts.clone())
        .collect();
    let svg = trajectories_svg(
        &route,
        &trajectories,
        &format!(
            "{} / {} — {} collision episodes",
            technique.name(),
            route_id.name(),
            trajectories.len()
        ),
    );
    let steps: Vec<u64> = rep.timeline.iter().map(|p| p.step).collect();
    let series = [BandSeries {
        label: technique.name().to_string(),
        mean: rep.timeline.iter().map(|p| p.violations_total as f64).collect(),
        band: vec![0.0; rep.timeline.len()],
    }];
    let timeline = timeline_svg(&series, &steps, "violations over time", "violations");
    let payload = serde_json::json!({
        "violations": rep.counted_violations(CampaignMode::Extension),
        "episodes": rep.episode_count,
        "coverage": rep.final_coverage(),
        "trajectories": trajectories.len(),
        "trajectory_svg": svg,
        "timeline_svg": timeline,
    });
    Ok(payload.to_string())
}

/// Q-table growth under full-precision vs rounded state keys: the
/// degeneracy picture, interactively.
#[wasm_bindgen]
pub fn growth_demo(route: &str, budget_steps: u32, decimals: i32, seed: u32) -> Result<String, JsValue> {
    growth_demo_impl(route, budget_steps, decimals, seed).map_err(|e| JsValue::from_str(&e))
}

fn growth_demo_impl(route: &str, budget_steps: u32, decimals: i32, seed: u32) -> Result<String, String> {
    let route_id = parse_route(route)?;
    let budget = (budget_steps as u64).clamp(2_000, 50_000);
    let precision = if decimals < 0 {
        KeyPrecision::Full
    } else {
        KeyPrecision::Decimals(decimals.min(12) as u8)
    };
    let cfg = CampaignConfig {
        technique: Technique::Q,
        route: route_id,
        mode: CampaignMode::Extension,
        budget_steps: budget,
        episode_timeout: 250,
        repetitions: 1,
        base_seed: seed as u64,
        key_precision: precision,
        jobs: 1,
        ..CampaignConfig::default()
    };
    let result = run_campaign(&cfg).map_err(|e| e.to_string())?;
    let rep = &result.reps[0];
    let points: Vec<(u64, u64)> = rep.growth.iter().map(|(s, v)| (*s, v[0] as u64)).collect();
    let ratio = points
        .last()
        .map(|(s, v)| *v as f64 / (*s).max(1) as f64)
        .unwrap_or(0.0);
    let label = match precision {
        KeyPrecision::Full => format!("{} full precision", route_id.name()),
        KeyPrecision::Decimals(d) => format!("{} {d} decimals", route_id.name()),
    };
    let svg = growth_svg(
        &[GrowthSeries { label, points }],
        "distinct table states over steps",
    );
    let payload = serde_json::json!({
        "ratio": ratio,
        "svg": svg,
    });
    Ok(payload.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_entry_points_work_on_native() {
        let svg = route_svg_impl("left_turn").unwrap();
        assert!(svg.contains("</svg>"));
        let out = run_demo_impl("random", "straight", 4_000, 3).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["trajectory_svg"].as_str().unwrap().contains("</svg>"));
        let out = growth_demo_impl("straight", 3_000, -1, 3).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["ratio"].as_f64().unwrap() > 0.5);
        assert!(route_svg_impl("diagonal").is_err());
    }
}
