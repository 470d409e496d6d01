//! Forward pass: probe-conditioned relevance, hop-by-hop propagation, and
//! click-probability prediction.

use super::{dot, matvec, sigmoid, softmax, ModelError, ModelParams};
use crate::kg::{RippleSets, Triple};
use crate::ItemId;

/// Clamp keeping predicted probabilities strictly inside (0, 1) so that
/// cross-entropy logs are always finite.
pub(crate) const PROB_CLAMP: f64 = 1e-12;

/// Per-hop intermediates of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct HopTrace {
    /// Raw relevance scores `probe . (R h)`, one per sampled triple. These
    /// are the log-space unnormalized weights behind `probs`.
    pub logits: Vec<f64>,
    /// Softmax of `logits`; sums to 1.
    pub probs: Vec<f64>,
    /// Probability-weighted sum of tail embeddings (length d). Serves as the
    /// next hop's probe.
    pub response: Vec<f64>,
}

/// Full record of one `(user, item)` forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub item: ItemId,
    pub hops: Vec<HopTrace>,
    /// Sum of the hop responses (length d).
    pub user_embedding: Vec<f64>,
    /// Inner product of `user_embedding` and the item embedding.
    pub logit: f64,
    /// `sigmoid(logit)`, clamped to the open interval (0, 1).
    pub probability: f64,
}

impl ModelParams {
    /// Softmax relevance of each triple to the probe: weights proportional to
    /// `exp(probe . (R_relation head))`. The probe must be finite and of
    /// length `dim`.
    pub fn relevance(&self, probe: &[f64], triples: &[Triple]) -> Result<Vec<f64>, ModelError> {
        Ok(softmax(&self.hop_logits(probe, triples)?))
    }

    fn hop_logits(&self, probe: &[f64], triples: &[Triple]) -> Result<Vec<f64>, ModelError> {
        if probe.len() != self.dim() {
            return Err(ModelError::ShapeMismatch { expected: self.dim(), got: probe.len() });
        }
        if probe.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite("probe"));
        }
        if triples.is_empty() {
            return Err(ModelError::EmptyHop);
        }
        triples
            .iter()
            .map(|t| {
                let head = self.entity(t.head)?;
                let rel = self.relation(t.relation)?;
                Ok(dot(probe, &matvec(rel, head, self.dim())))
            })
            .collect()
    }

    /// Runs the full forward pass for one `(user, item)` pair: the item
    /// embedding probes hop 1, each hop's response probes the next, responses
    /// sum to the user embedding, and the click probability is the logistic
    /// of its inner product with the item embedding.
    pub fn propagate(&self, ripple: &RippleSets, item: ItemId) -> Result<ForwardTrace, ModelError> {
        let d = self.dim();
        let item_emb = self.item(item)?.to_vec();
        let mut hops = Vec::with_capacity(ripple.hop_count());
        let mut probe = item_emb.clone();
        for hop_triples in &ripple.hops {
            let logits = self.hop_logits(&probe, hop_triples)?;
            let probs = softmax(&logits);
            let mut response = vec![0.0; d];
            for (t, &p) in hop_triples.iter().zip(&probs) {
                let tail = self.entity(t.tail)?;
                for (r, &x) in response.iter_mut().zip(tail) {
                    *r += p * x;
                }
            }
            probe = response.clone();
            hops.push(HopTrace { logits, probs, response });
        }
        if hops.is_empty() {
            return Err(ModelError::EmptyHop);
        }

        let mut user_embedding = vec![0.0; d];
        for hop in &hops {
            for (u, &r) in user_embedding.iter_mut().zip(&hop.response) {
                *u += r;
            }
        }
        let logit = dot(&user_embedding, &item_emb);
        let probability = sigmoid(logit).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        Ok(ForwardTrace { item, hops, user_embedding, logit, probability })
    }

    /// The click probability of a completed forward pass.
    pub fn predict(&self, trace: &ForwardTrace) -> f64 {
        trace.probability
    }

    /// Convenience: propagate and return just the click probability.
    pub fn score_pair(&self, ripple: &RippleSets, item: ItemId) -> Result<f64, ModelError> {
        Ok(self.propagate(ripple, item)?.probability)
    }

    /// Bilinear plausibility score `head . (R_relation tail)` of one triple.
    /// Unbounded; higher means more plausible.
    pub fn kge_score(&self, triple: &Triple) -> Result<f64, ModelError> {
        let head = self.entity(triple.head)?;
        let rel = self.relation(triple.relation)?;
        let tail = self.entity(triple.tail)?;
        Ok(dot(head, &matvec(rel, tail, self.dim())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    pub(crate) fn random_params(
        rng: &mut StdRng,
        entities: usize,
        items: usize,
        relations: usize,
        dim: usize,
    ) -> ModelParams {
        let table = |rng: &mut StdRng, n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect()
        };
        ModelParams::from_parts(
            dim,
            table(rng, entities * dim),
            table(rng, items * dim),
            table(rng, relations * dim * dim),
        )
        .unwrap()
    }

    fn ripple_of(hops: Vec<Vec<Triple>>) -> RippleSets {
        let fallback = vec![false; hops.len()];
        RippleSets { user: 0, seeds: vec![0], hops, fallback }
    }

    fn tri(head: usize, relation: usize, tail: usize) -> Triple {
        Triple { head, relation, tail }
    }

    /// Oracle: naive softmax over explicitly computed bilinear forms, all in
    /// index notation without any shared helper code.
    fn relevance_oracle(params: &ModelParams, probe: &[f64], triples: &[Triple]) -> Vec<f64> {
        let d = probe.len();
        let scores: Vec<f64> = triples
            .iter()
            .map(|t| {
                let head = params.entity(t.head).unwrap();
                let rel = params.relation(t.relation).unwrap();
                let mut z = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        z += probe[a] * rel[a * d + b] * head[b];
                    }
                }
                z
            })
            .collect();
        let exps: Vec<f64> = scores.iter().map(|&z| z.exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    #[test]
    fn single_triple_hop_gets_full_relevance() {
        let mut rng = StdRng::seed_from_u64(1);
        let params = random_params(&mut rng, 4, 2, 2, 3);
        let probe = vec![0.3, -0.2, 0.5];
        let probs = params.relevance(&probe, &[tri(1, 0, 2)]).unwrap();
        assert_eq!(probs, vec![1.0]);
    }

    #[test]
    fn duplicated_triples_share_relevance_equally() {
        let mut rng = StdRng::seed_from_u64(2);
        let params = random_params(&mut rng, 4, 2, 2, 3);
        let probe = vec![0.4, 0.1, -0.6];
        let probs = params.relevance(&probe, &[tri(2, 1, 0); 4]).unwrap();
        for &p in &probs {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn relevance_matches_naive_exp_oracle() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..50 {
            let dim = *[2, 4, 8].iter().nth(rng.gen_range(0..3)).unwrap();
            let params = random_params(&mut rng, 8, 2, 3, dim);
            let probe: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let triples: Vec<Triple> = (0..rng.gen_range(1..=5))
                .map(|_| tri(rng.gen_range(0..8), rng.gen_range(0..3), rng.gen_range(0..8)))
                .collect();
            let got = params.relevance(&probe, &triples).unwrap();
            let want = relevance_oracle(&params, &probe, &triples);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "got {g}, oracle {w}");
            }
            let total: f64 = got.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn relevance_rejects_bad_probes_and_ids() {
        let mut rng = StdRng::seed_from_u64(4);
        let params = random_params(&mut rng, 4, 2, 2, 3);
        assert!(matches!(
            params.relevance(&[0.0; 2], &[tri(0, 0, 1)]),
            Err(ModelError::ShapeMismatch { expected: 3, got: 2 })
        ));
        assert!(matches!(
            params.relevance(&[f64::NAN, 0.0, 0.0], &[tri(0, 0, 1)]),
            Err(ModelError::NonFinite("probe"))
        ));
        assert!(matches!(
            params.relevance(&[0.0; 3], &[tri(9, 0, 1)]),
            Err(ModelError::EntityOutOfRange { id: 9, .. })
        ));
        assert!(matches!(
            params.relevance(&[0.0; 3], &[tri(0, 7, 1)]),
            Err(ModelError::RelationOutOfRange { id: 7, .. })
        ));
        assert!(matches!(params.relevance(&[0.0; 3], &[]), Err(ModelError::EmptyHop)));
    }

    /// Oracle: a from-scratch straight-line forward pass in index notation.
    fn forward_oracle(params: &ModelParams, ripple: &RippleSets, item: ItemId) -> f64 {
        let d = params.dim();
        let item_emb = params.item(item).unwrap();
        let mut probe: Vec<f64> = item_emb.to_vec();
        let mut user = vec![0.0; d];
        for hop in &ripple.hops {
            let mut exps = Vec::new();
            for t in hop {
                let head = params.entity(t.head).unwrap();
                let rel = params.relation(t.relation).unwrap();
                let mut z = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        z += probe[a] * rel[a * d + b] * head[b];
                    }
                }
                exps.push(z.exp());
            }
            let sum: f64 = exps.iter().sum();
            let mut response = vec![0.0; d];
            for (t, &e) in hop.iter().zip(&exps) {
                let tail = params.entity(t.tail).unwrap();
                for i in 0..d {
                    response[i] += (e / sum) * tail[i];
                }
            }
            for i in 0..d {
                user[i] += response[i];
            }
            probe = response;
        }
        let mut logit = 0.0;
        for i in 0..d {
            logit += user[i] * item_emb[i];
        }
        1.0 / (1.0 + (-logit).exp())
    }

    #[test]
    fn propagation_matches_straight_line_oracle() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..50 {
            let dim = *[2, 4, 8].iter().nth(rng.gen_range(0..3)).unwrap();
            let (entities, items, relations) = (10, 3, 3);
            let params = random_params(&mut rng, entities, items, relations, dim);
            let hops: Vec<Vec<Triple>> = (0..rng.gen_range(1..=3))
                .map(|_| {
                    (0..rng.gen_range(1..=4))
                        .map(|_| {
                            tri(
                                rng.gen_range(0..entities),
                                rng.gen_range(0..relations),
                                rng.gen_range(0..entities),
                            )
                        })
                        .collect()
                })
                .collect();
            let ripple = ripple_of(hops);
            let item = rng.gen_range(0..items);
            let trace = params.propagate(&ripple, item).unwrap();
            let want = forward_oracle(&params, &ripple, item);
            assert!((trace.probability - want).abs() < 1e-12);

            // Structural invariants of the trace.
            assert_eq!(trace.hops.len(), ripple.hop_count());
            for (hop_trace, hop) in trace.hops.iter().zip(&ripple.hops) {
                assert_eq!(hop_trace.probs.len(), hop.len());
                assert_eq!(hop_trace.response.len(), dim);
                let sum: f64 = hop_trace.probs.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
            let mut resum = vec![0.0; dim];
            for hop_trace in &trace.hops {
                for (u, &r) in resum.iter_mut().zip(&hop_trace.response) {
                    *u += r;
                }
            }
            assert_eq!(resum, trace.user_embedding);
            assert!(trace.probability > 0.0 && trace.probability < 1.0);
            assert_eq!(params.predict(&trace), trace.probability);
            assert_eq!(params.score_pair(&ripple, item).unwrap(), trace.probability);
        }
    }

    #[test]
    fn known_one_hop_instance_predicts_three_quarters() {
        // d = 1, single triple. The probe is the item embedding [1]; the only
        // triple gets probability 1, so the user embedding is the tail row
        // [ln 3] and the click logit is ln 3: sigmoid(ln 3) = 3/4.
        let params = ModelParams::from_parts(
            1,
            vec![0.0, 3.0_f64.ln()], // entity 0 (head), entity 1 (tail)
            vec![1.0],               // item 0
            vec![5.0],               // relation 0 (1x1 matrix; softmax of one is 1 anyway)
        )
        .unwrap();
        let ripple = ripple_of(vec![vec![tri(0, 0, 1)]]);
        let trace = params.propagate(&ripple, 0).unwrap();
        assert!((trace.logit - 3.0_f64.ln()).abs() < 1e-15);
        assert!((trace.probability - 0.75).abs() < 1e-15);
    }

    #[test]
    fn extreme_logits_clamp_into_the_open_interval() {
        let params = ModelParams::from_parts(
            1,
            vec![0.0, 1000.0],
            vec![1.0],
            vec![1.0],
        )
        .unwrap();
        let ripple = ripple_of(vec![vec![tri(0, 0, 1)]]);
        let up = params.propagate(&ripple, 0).unwrap();
        assert_eq!(up.probability, 1.0 - PROB_CLAMP);

        let params = ModelParams::from_parts(
            1,
            vec![0.0, -1000.0],
            vec![1.0],
            vec![1.0],
        )
        .unwrap();
        let down = params.propagate(&ripple, 0).unwrap();
        assert_eq!(down.probability, PROB_CLAMP);
    }

    #[test]
    fn triple_score_matches_index_oracle() {
        // d = 1: score = h * R * t = 2 * 3 * 5.
        let params =
            ModelParams::from_parts(1, vec![2.0, 5.0], vec![0.0], vec![3.0]).unwrap();
        assert_eq!(params.kge_score(&tri(0, 0, 1)).unwrap(), 30.0);

        let mut rng = StdRng::seed_from_u64(6);
        for _ in 0..30 {
            let dim = rng.gen_range(1..=6);
            let params = random_params(&mut rng, 6, 1, 2, dim);
            let t = tri(rng.gen_range(0..6), rng.gen_range(0..2), rng.gen_range(0..6));
            let head = params.entity(t.head).unwrap();
            let rel = params.relation(t.relation).unwrap();
            let tail = params.entity(t.tail).unwrap();
            let mut want = 0.0;
            for a in 0..dim {
                for b in 0..dim {
                    want += head[a] * rel[a * dim + b] * tail[b];
                }
            }
            let got = params.kge_score(&t).unwrap();
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn propagate_rejects_out_of_range_items() {
        let mut rng = StdRng::seed_from_u64(7);
        let params = random_params(&mut rng, 4, 2, 2, 3);
        let ripple = ripple_of(vec![vec![tri(0, 0, 1)]]);
        assert!(matches!(
            params.propagate(&ripple, 5),
            Err(ModelError::ItemOutOfRange { id: 5, .. })
        ));
    }
}
