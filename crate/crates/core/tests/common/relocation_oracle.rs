use ddsp_core::relocation::RelocationInstance;
use rand::Rng;

/// Expected profit of integer flows with recourse `y = min(s', d)`,
/// computed directly from the model definition.
pub fn profit_of_flows(inst: &RelocationInstance, flows: &[Vec<f64>], scenarios: &[Vec<f64>]) -> Option<f64> {
    let z = inst.stock.len();
    let mut post = inst.stock.clone();
    let mut move_cost = 0.0;
    for i in 0..z {
        for j in 0..z {
            post[i] -= flows[i][j];
            post[j] += flows[i][j];
            move_cost += inst.cost[i][j] * flows[i][j];
        }
    }
    if post.iter().any(|s| *s < 0.0) {
        return None;
    }
    let mut total = 0.0;
    for d in scenarios {
        for (s, dz) in post.iter().zip(d) {
            let served = s.min(*dz);
            total += inst.price * served - inst.penalty * (dz - served);
        }
    }
    Some(total / scenarios.len() as f64 - move_cost)
}

/// Best profit over all integer flow matrices with every off-diagonal
/// entry in `0..=max_flow`.
pub fn grid_search(inst: &RelocationInstance, scenarios: &[Vec<f64>], max_flow: usize) -> f64 {
    let z = inst.stock.len();
    let pairs: Vec<(usize, usize)> = (0..z).flat_map(|i| (0..z).filter(move |j| *j != i).map(move |j| (i, j))).collect();
    let mut counter = vec![0usize; pairs.len()];
    let mut best = f64::NEG_INFINITY;
    loop {
        let mut flows = vec![vec![0.0; z]; z];
        for ((i, j), c) in pairs.iter().zip(&counter) {
            flows[*i][*j] = *c as f64;
        }
        if let Some(v) = profit_of_flows(inst, &flows, scenarios) {
            best = best.max(v);
        }
        let mut k = 0;
        loop {
            if k == counter.len() {
                return best;
            }
            counter[k] += 1;
            if counter[k] <= max_flow {
                break;
            }
            counter[k] = 0;
            k += 1;
        }
    }
}

/// Random instance with integer stock, costs and demands.
pub fn random_instance<R: Rng>(rng: &mut R, zones: usize, stock_max: u32) -> RelocationInstance {
    let stock = (0..zones).map(|_| rng.random_range(0..=stock_max) as f64).collect();
    let cost = (0..zones)
        .map(|i| (0..zones).map(|j| if i == j { 0.0 } else { rng.random_range(1..=3) as f64 * 0.5 }).collect())
        .collect();
    RelocationInstance {
        zones: (0..zones).map(|z| format!("z{z}")).collect(),
        stock,
        cost,
        price: rng.random_range(2..=10) as f64,
        penalty: rng.random_range(0..=5) as f64,
    }
}
