use super::maxflow::{max_flow, FlowNetwork};
use super::Labeling;
use crate::energy::EnergyModel;
use crate::error::{Error, Result};

/// Energy after one sweep over all labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub sweep: usize,
    pub energy: f64,
    pub labels_used: usize,
}

impl SweepRecord {
    /// `sweep,energy,labels_used` line for trace files.
    pub fn to_csv_line(&self) -> String {
        format!("{},{:.12},{}", self.sweep, self.energy, self.labels_used)
    }
}

/// Minimizes the energy over labelings where each pixel takes either
/// `lab0[p]` or `lab1[p]`, with one max-flow. Pairwise terms must be
/// submodular for this choice, which Potts weights guarantee whenever `lab1`
/// is constant or `lab0` and `lab1` are both constant.
///
/// Label costs are exact when no label is both lost by some pixels and
/// gained by others.
pub fn solve_binary(model: &EnergyModel, lab0: &[u32], lab1: &[u32]) -> Result<Vec<u32>> {
    let n = model.num_pixels();
    if lab0.len() != n || lab1.len() != n {
        return Err(Error::DimensionMismatch {
            expected: (model.width(), model.height()),
            got: (lab0.len().min(lab1.len()), 1),
        });
    }
    let num_labels = model.num_labels();
    if let Some(&l) = lab0.iter().chain(lab1).find(|&&l| l as usize >= num_labels) {
        return Err(Error::LabelOutOfRange {
            label: l as usize,
            num_labels,
        });
    }

    // cost of x_p = 0 (keep lab0) and x_p = 1 (take lab1)
    let mut u0: Vec<f64> = (0..n).map(|p| model.data_cost(p, lab0[p] as usize)).collect();
    let mut u1: Vec<f64> = (0..n).map(|p| model.data_cost(p, lab1[p] as usize)).collect();
    let mut pair = Vec::new();
    for e in model.edges() {
        let (p, q) = (e.p as usize, e.q as usize);
        let diff = |a: u32, b: u32| if a != b { e.weight } else { 0.0 };
        let e00 = diff(lab0[p], lab0[q]);
        let e01 = diff(lab0[p], lab1[q]);
        let e10 = diff(lab1[p], lab0[q]);
        let e11 = diff(lab1[p], lab1[q]);
        // E = e00 + (e10-e00) x_p + (e11-e10) x_q + λ (1-x_p) x_q
        let lambda = e01 + e10 - e00 - e11;
        if lambda < -1e-12 {
            return Err(Error::InvalidParameter(format!(
                "non-submodular pairwise term between pixels {p} and {q}"
            )));
        }
        u0[p] += e00;
        u1[p] += e10;
        u1[q] += e11 - e10;
        if lambda > 0.0 {
            pair.push((p, q, lambda));
        }
    }

    let mut net = FlowNetwork::new(n);
    let mut big = 1.0;
    for p in 0..n {
        let m = u0[p].min(u1[p]);
        net.add_terminal(p, u1[p] - m, u0[p] - m);
        big += (u1[p] - m) + (u0[p] - m);
    }
    for &(p, q, lambda) in &pair {
        net.add_edge(p, q, lambda, 0.0);
        big += lambda;
    }

    // per label: kept by some pixel, or the pixels that would lose / gain it
    let mut kept = vec![false; num_labels];
    let mut lost: Vec<Vec<usize>> = vec![Vec::new(); num_labels];
    let mut gained: Vec<Vec<usize>> = vec![Vec::new(); num_labels];
    for p in 0..n {
        let (a, b) = (lab0[p] as usize, lab1[p] as usize);
        if a == b {
            kept[a] = true;
        } else {
            if model.label_cost(a) > 0.0 {
                lost[a].push(p);
            }
            if model.label_cost(b) > 0.0 {
                gained[b].push(p);
            }
        }
    }
    let mut gain = Vec::new();
    let mut lose = Vec::new();
    for l in 0..num_labels {
        let h = model.label_cost(l);
        if h <= 0.0 || kept[l] {
            continue;
        }
        let (lost, gained) = (std::mem::take(&mut lost[l]), std::mem::take(&mut gained[l]));
        match (lost.is_empty(), gained.is_empty()) {
            (true, true) => {}
            (false, true) => lose.push((h, lost)),
            (true, false) => gain.push((h, gained)),
            (false, false) => {
                return Err(Error::InvalidParameter(format!(
                    "label {l} is both lost and gained in one binary move"
                )))
            }
        }
        big += h;
    }
    // h paid iff some pixel keeps the label (x_p = 0): y = 0 forced by p
    for (h, pixels) in &lose {
        let y = net.add_node();
        net.add_terminal(y, 0.0, *h);
        for &p in pixels {
            net.add_edge(p, y, big, 0.0);
        }
    }
    // h paid iff some pixel takes the label (x_p = 1): y = 1 forced by p
    for (h, pixels) in &gain {
        let y = net.add_node();
        net.add_terminal(y, *h, 0.0);
        for &p in pixels {
            net.add_edge(y, p, big, 0.0);
        }
    }

    let cut = max_flow(&net)?;
    Ok((0..n)
        .map(|p| if cut.source_side[p] { lab0[p] } else { lab1[p] })
        .collect())
}

/// Best labeling reachable from `current` by switching any subset of
/// pixels to `alpha`. Never returns a higher energy than `current`.
pub fn expansion_move(model: &EnergyModel, current: &Labeling, alpha: u32) -> Result<Labeling> {
    model.check_labeling(current)?;
    if alpha as usize >= model.num_labels() {
        return Err(Error::LabelOutOfRange {
            label: alpha as usize,
            num_labels: model.num_labels(),
        });
    }
    let (w, h) = current.dims();
    let target = vec![alpha; w * h];
    let labels = solve_binary(model, current.labels(), &target)?;
    if model.energy_unchecked(&labels) > model.energy_unchecked(current.labels()) {
        return Ok(current.clone());
    }
    Labeling::new(w, h, labels)
}

/// Every pixel gets its cheapest data-cost label, lowest id on ties.
pub fn cheapest_labeling(model: &EnergyModel) -> Labeling {
    let labels = (0..model.num_pixels())
        .map(|p| {
            let mut best = 0;
            for l in 1..model.num_labels() {
                if model.data_cost(p, l) < model.data_cost(p, best) {
                    best = l;
                }
            }
            best as u32
        })
        .collect();
    Labeling::new(model.width(), model.height(), labels).expect("model dimensions")
}

fn improves(new: f64, old: f64) -> bool {
    new < old - 1e-12 * old.abs().max(1.0)
}

/// Alpha-expansion from `init`. Returns the final labeling and the energy
/// trace: the initial energy followed by the energy after each sweep.
pub fn minimize(model: &EnergyModel, init: &Labeling, max_sweeps: usize) -> Result<(Labeling, Vec<f64>)> {
    minimize_with(model, init, max_sweeps, |_, _| {})
}

/// As [`minimize`], calling `observe` after every sweep.
///
/// Labels are visited background first, then seeds in id order. With two
/// labels the first sweep starts from the global optimum of the binary
/// problem. A move is accepted only if it lowers the energy; the loop stops
/// after a sweep with no accepted move or after `max_sweeps` sweeps.
pub fn minimize_with<F>(
    model: &EnergyModel,
    init: &Labeling,
    max_sweeps: usize,
    mut observe: F,
) -> Result<(Labeling, Vec<f64>)>
where
    F: FnMut(&SweepRecord, &Labeling),
{
    model.check_labeling(init)?;
    let mut current = init.clone();
    let mut energy = model.energy_unchecked(current.labels());
    let mut trace = vec![energy];
    let n = model.num_pixels();
    let mut version = 0u64;
    let mut tried_at: Vec<Option<u64>> = vec![None; model.num_labels()];

    for sweep in 1..=max_sweeps {
        let mut changed = false;
        if sweep == 1 && model.num_labels() == 2 {
            let labels = solve_binary(model, &vec![0; n], &vec![1; n])?;
            let e = model.energy_unchecked(&labels);
            if improves(e, energy) {
                current = Labeling::new(model.width(), model.height(), labels)?;
                energy = e;
                changed = true;
                version += 1;
            }
        }
        for alpha in 0..model.num_labels() as u32 {
            // the move is deterministic: unchanged input, unchanged outcome
            if tried_at[alpha as usize] == Some(version) {
                continue;
            }
            let next = expansion_move(model, &current, alpha)?;
            let e = model.energy_unchecked(next.labels());
            if next != current && improves(e, energy) {
                current = next;
                energy = e;
                changed = true;
                version += 1;
            } else {
                tried_at[alpha as usize] = Some(version);
            }
        }
        trace.push(energy);
        let record = SweepRecord {
            sweep,
            energy,
            labels_used: current.used_labels().len(),
        };
        observe(&record, &current);
        if !changed {
            break;
        }
    }
    Ok((current, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{evaluate_energy, grid_neighbor_pairs, Edge};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(rng: &mut ChaCha8Rng, w: usize, h: usize, labels: usize, label_costs: bool) -> EnergyModel {
        let data = (0..w * h * labels).map(|_| rng.random::<f64>() * 3.0).collect();
        let edges = grid_neighbor_pairs(w, h)
            .into_iter()
            .map(|(p, q)| Edge { p, q, weight: rng.random::<f64>() * 1.5 })
            .collect();
        let lc = (0..labels)
            .map(|_| if label_costs { rng.random::<f64>() * 3.0 } else { 0.0 })
            .collect();
        EnergyModel::new(w, h, labels, data, edges, lc).unwrap()
    }

    fn energy(m: &EnergyModel, w: usize, h: usize, labels: Vec<u32>) -> f64 {
        evaluate_energy(m, &Labeling::new(w, h, labels).unwrap()).unwrap()
    }

    #[test]
    fn all_alpha_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_model(&mut rng, 3, 3, 3, true);
        let cur = Labeling::constant(3, 3, 2);
        assert_eq!(expansion_move(&m, &cur, 2).unwrap(), cur);
    }

    #[test]
    fn one_by_two_hand_example() {
        // switching pixel 0 saves 2, the cut edge costs 1, switching pixel 1 costs 3
        let data = vec![2.0, 0.0, 0.0, 3.0];
        let edges = vec![Edge { p: 0, q: 1, weight: 1.0 }];
        let m = EnergyModel::new(2, 1, 2, data, edges, vec![0.0, 0.0]).unwrap();
        let out = expansion_move(&m, &Labeling::constant(2, 1, 0), 1).unwrap();
        assert_eq!(out.labels(), &[1, 0]);
    }

    #[test]
    fn alpha_out_of_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_model(&mut rng, 2, 2, 2, false);
        assert!(matches!(
            expansion_move(&m, &Labeling::constant(2, 2, 0), 2),
            Err(Error::LabelOutOfRange { label: 2, .. })
        ));
    }

    #[test]
    fn move_beats_every_candidate_on_3x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..60 {
            let m = random_model(&mut rng, 3, 3, 3, true);
            let cur: Vec<u32> = (0..9).map(|_| rng.random_range(0..3)).collect();
            let alpha = rng.random_range(0..3u32);
            let out = expansion_move(&m, &Labeling::new(3, 3, cur.clone()).unwrap(), alpha).unwrap();
            let got = evaluate_energy(&m, &out).unwrap();
            for mask in 0..512u32 {
                let cand: Vec<u32> = (0..9)
                    .map(|p| if mask >> p & 1 == 1 { alpha } else { cur[p] })
                    .collect();
                assert!(got <= energy(&m, 3, 3, cand) + 1e-9);
            }
        }
    }

    #[test]
    fn binary_minimize_is_exact_with_label_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m = random_model(&mut rng, 3, 4, 2, true);
            let (out, _) = minimize(&m, &cheapest_labeling(&m), 10).unwrap();
            let got = evaluate_energy(&m, &out).unwrap();
            let best = (0..1u32 << 12)
                .map(|mask| energy(&m, 3, 4, (0..12).map(|p| mask >> p & 1).collect()))
                .fold(f64::INFINITY, f64::min);
            assert!((got - best).abs() < 1e-9, "{got} vs {best}");
        }
    }

    #[test]
    fn single_label_model_is_one_noop_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_model(&mut rng, 4, 3, 1, true);
        let init = Labeling::constant(4, 3, 0);
        let (out, trace) = minimize(&m, &init, 10).unwrap();
        assert_eq!(out, init);
        assert_eq!(trace.len(), 2);
        assert_eq!(trace[0], trace[1]);
    }

    #[test]
    fn disc_with_clean_border() {
        // 6x6: interior block at (1..5, 1..5) cheap for the seed, rest background
        let (w, h) = (6, 6);
        let inside = |p: usize| (1..5).contains(&(p % w)) && (1..5).contains(&(p / w));
        let mut data = Vec::new();
        for p in 0..w * h {
            if inside(p) {
                data.extend([2.0, 0.0]);
            } else {
                data.extend([0.0, 6.0]);
            }
        }
        let edges = grid_neighbor_pairs(w, h)
            .into_iter()
            .map(|(p, q)| {
                let weight = if inside(p as usize) != inside(q as usize) { 1e-5 } else { 0.97 };
                Edge { p, q, weight }
            })
            .collect();
        let m = EnergyModel::new(w, h, 2, data, edges, vec![0.0, 2.5]).unwrap();
        let (out, _) = minimize(&m, &Labeling::constant(w, h, 0), 10).unwrap();
        let expect: Vec<u32> = (0..w * h).map(|p| inside(p) as u32).collect();
        assert_eq!(out.labels(), &expect[..]);
        // no single flip improves it
        let base = evaluate_energy(&m, &out).unwrap();
        for p in 0..w * h {
            let mut flip = expect.clone();
            flip[p] ^= 1;
            assert!(energy(&m, w, h, flip) >= base);
        }
    }

    #[test]
    fn trace_monotone_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let m = random_model(&mut rng, 8, 7, 5, true);
            let init: Vec<u32> = (0..56).map(|_| rng.random_range(0..5)).collect();
            let init = Labeling::new(8, 7, init).unwrap();
            let mut seen = Vec::new();
            let (out, trace) = minimize_with(&m, &init, 10, |r, lab| {
                seen.push((r.energy, evaluate_energy(&m, lab).unwrap(), r.labels_used, lab.used_labels().len()));
            })
            .unwrap();
            assert_eq!(trace[0], evaluate_energy(&m, &init).unwrap());
            for pair in trace.windows(2) {
                assert!(pair[1] - pair[0] <= 1e-9);
            }
            for (reported, recomputed, used, counted) in seen {
                assert!((reported - recomputed).abs() < 1e-9);
                assert_eq!(used, counted);
            }
            assert_eq!(*trace.last().unwrap(), evaluate_energy(&m, &out).unwrap());
            // converged: no single expansion improves
            for alpha in 0..5 {
                let next = expansion_move(&m, &out, alpha).unwrap();
                assert!(evaluate_energy(&m, &next).unwrap() >= trace.last().unwrap() - 1e-9);
            }
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let m = random_model(&mut rng, 7, 7, 4, true);
        let init = cheapest_labeling(&m);
        assert_eq!(minimize(&m, &init, 10).unwrap(), minimize(&m, &init, 10).unwrap());
    }

    #[test]
    fn cheapest_breaks_ties_low() {
        let m = EnergyModel::new(2, 1, 3, vec![1.0, 1.0, 0.5, 0.0, 0.0, 0.0], vec![], vec![0.0; 3]).unwrap();
        assert_eq!(cheapest_labeling(&m).labels(), &[2, 0]);
    }
}
