use ff6v_wasm_demo::{heatmap, liquid, tiling};
use serde_json::Value;

#[test]
fn heatmap_has_square_grid_with_density_diagonal() {
    let v: Value = serde_json::from_str(&heatmap("", 3).unwrap()).unwrap();
    let rows = v["values"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.as_array().unwrap().len(), 6);
        let d = r[i].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&d), "{d}");
    }
    assert!(heatmap("", 0).is_err());
}

#[test]
fn tiling_is_deterministic_svg() {
    let a = tiling("", 4, 16).unwrap();
    assert!(a.contains("<svg"));
    assert_eq!(a, tiling("", 4, 16).unwrap());
}

#[test]
fn liquid_grid_marks_frozen_cells() {
    let v: Value = serde_json::from_str(&liquid([0.5, 2.0 / 3.0, 0.9, 0.8, 0.5], 3.0, 3.0, 24, 24).unwrap()).unwrap();
    let cells: Vec<&Value> = v["density"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).collect();
    assert_eq!(cells.len(), 576);
    let inside: Vec<f64> = cells.iter().filter_map(|c| c.as_f64()).collect();
    assert!(!inside.is_empty() && inside.len() < cells.len());
    assert!(inside.iter().all(|d| (0.0..=1.0).contains(d)));
    assert!(liquid([0.9, 0.5, 0.4, 0.8, 0.5], 1.0, 1.0, 4, 4).is_err());
}
