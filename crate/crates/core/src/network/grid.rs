//! Seeded generator for rectangular grid maps, used by scenarios that do
//! not ship a hand-written network file.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{NetworkError, NetworkSpec, RoadDecl, RoadNetwork, StateDecl};

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
    /// Inclusive travel-duration range for each (two-way) road.
    pub weight_min: u64,
    pub weight_max: u64,
    /// Probability that a state carries a location proposition.
    pub label_density: f64,
    pub seed: u64,
}

/// Builds a `rows x cols` grid with 4-neighbor two-way roads. Road weights
/// are sampled uniformly from the weight range (symmetric per road pair);
/// each state independently carries a unique location proposition with
/// probability `label_density`, plus a quadrant proposition shared by the
/// labeled states of its map quarter (so formulas can require co-located
/// conditions). State `n{r}_{c}` is labeled `p{r}_{c}` and `a{quadrant}`.
pub fn generate_grid(spec: &GridSpec) -> Result<RoadNetwork, NetworkError> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(NetworkError::Validation("grid needs rows, cols >= 1".into()));
    }
    if spec.weight_min == 0 || spec.weight_min > spec.weight_max {
        return Err(NetworkError::Validation(format!(
            "bad weight range {}..={}",
            spec.weight_min, spec.weight_max
        )));
    }
    if !(0.0..=1.0).contains(&spec.label_density) {
        return Err(NetworkError::Validation(format!(
            "label density {} outside [0, 1]",
            spec.label_density
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut net = NetworkSpec::default();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let props = if rng.gen_bool(spec.label_density) {
                let quadrant = u32::from(r >= spec.rows.div_ceil(2)) * 2
                    + u32::from(c >= spec.cols.div_ceil(2));
                vec![format!("p{r}_{c}"), format!("a{quadrant}")]
            } else {
                Vec::new()
            };
            net.states.push(StateDecl {
                name: format!("n{r}_{c}"),
                props,
            });
        }
    }
    let mut road = |from: String, to: String, rng: &mut ChaCha8Rng| {
        let weight = rng.gen_range(spec.weight_min..=spec.weight_max);
        net.roads.push(RoadDecl {
            from,
            to,
            weight,
            two_way: true,
        });
    };
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            if c + 1 < spec.cols {
                road(format!("n{r}_{c}"), format!("n{r}_{}", c + 1), &mut rng);
            }
            if r + 1 < spec.rows {
                road(format!("n{r}_{c}"), format!("n{}_{c}", r + 1), &mut rng);
            }
        }
    }
    RoadNetwork::from_spec(&net)
}
