#include "airmvc/trainer.hpp"

#include "airmvc/kmeans.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace airmvc {

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_dr: return "no_dr";
    case Ablation::no_con: return "no_con";
    case Ablation::no_dr_con: return "no_dr_con";
  }
  return "full";
}

Ablation parse_ablation(const std::string& text) {
  if (text == "full") return Ablation::full;
  if (text == "no_dr") return Ablation::no_dr;
  if (text == "no_con") return Ablation::no_con;
  if (text == "no_dr_con") return Ablation::no_dr_con;
  throw std::invalid_argument("unknown ablation '" + text +
                              "' (expected full, no_dr, no_con, no_dr_con)");
}

void TrainConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  if (!std::isfinite(alpha) || !std::isfinite(beta)) {
    throw std::invalid_argument("alpha and beta must be finite");
  }
  if (!(similarity_clamp > 0.0 && similarity_clamp < 1.0)) {
    throw std::invalid_argument("similarity_clamp must lie in (0, 1)");
  }
  if (hidden_dim == 0 || latent_dim == 0) {
    throw std::invalid_argument("hidden_dim and latent_dim must be positive");
  }
  if (!(head_init_scale > 0.0)) throw std::invalid_argument("head_init_scale must be positive");
}

TrainState init_state(const MultiViewDataset& dataset, const TrainConfig& config) {
  dataset.validate();
  config.validate();
  std::vector<std::size_t> dims;
  for (const auto& v : dataset.views) dims.push_back(v.cols());

  TrainState s;
  s.model = make_bundle(dims, dataset.num_clusters, config.hidden_dim, config.latent_dim,
                        config.seed);
  for (auto* p : s.model.parameters()) s.optimizer.emplace_back(*p, config.learning_rate);
  s.phi.assign(dataset.num_views(), std::vector<double>(dataset.num_samples(), 1.0));
  s.clean_scores.assign(dataset.num_views(), {});
  s.clean_gmms.assign(dataset.num_views(), CleanGmm2{});
  return s;
}

namespace {

std::vector<Matrix> batch_views(const MultiViewDataset& dataset,
                                std::span<const std::size_t> batch) {
  std::vector<Matrix> xs;
  xs.reserve(dataset.num_views());
  for (const auto& v : dataset.views) xs.push_back(select_rows(v, batch));
  return xs;
}

void check_finite(const LossBreakdown& loss, const char* phase, std::size_t epoch,
                  std::size_t batch) {
  if (!std::isfinite(loss.total) || !std::isfinite(loss.recon) || !std::isfinite(loss.rectify) ||
      !std::isfinite(loss.contrastive)) {
    std::ostringstream msg;
    msg << phase << ": non-finite loss at epoch " << epoch << ", batch " << batch
        << " (recon=" << loss.recon << ", rectify=" << loss.rectify
        << ", contrastive=" << loss.contrastive << ")";
    throw TrainingError(msg.str());
  }
}

void adam_update(TrainState& state, bool autoencoder_only) {
  auto params = state.model.parameters();
  std::size_t per_view = state.model.views.empty() ? 0 : params.size() / state.model.views.size();
  for (std::size_t k = 0; k < params.size(); ++k) {
    // Per view the first 8 parameters are the encoder and decoder.
    if (autoencoder_only && per_view > 0 && k % per_view >= 8) continue;
    adam_step(*params[k], state.optimizer[k]);
  }
}

void accumulate(LossBreakdown& sum, const LossBreakdown& part, double weight) {
  sum.recon += weight * part.recon;
  sum.rectify += weight * part.rectify;
  sum.contrastive += weight * part.contrastive;
  sum.total += weight * part.total;
  sum.selected_pair_count += part.selected_pair_count;
}

std::vector<double> mean_phi(const TrainState& state) {
  std::vector<double> out;
  for (const auto& phi : state.phi) {
    out.push_back(phi.empty() ? 1.0
                              : std::accumulate(phi.begin(), phi.end(), 0.0) /
                                    static_cast<double>(phi.size()));
  }
  return out;
}

}  // namespace

void pretrain(TrainState& state, const MultiViewDataset& dataset, const TrainConfig& config) {
  const std::size_t n = dataset.num_samples();
  for (std::size_t e = 0; e < config.pretrain_epochs; ++e) {
    const std::size_t epoch = state.epochs_done();
    const auto batches = minibatch_iter(n, config.batch_size, config.seed, epoch);
    LossBreakdown sum;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      state.model.zero_grad();
      const auto xs = batch_views(dataset, batches[b]);
      std::vector<ViewForward> fwd;
      std::vector<Matrix> recon;
      for (std::size_t v = 0; v < xs.size(); ++v) {
        const auto& m = state.model.views[v];
        ViewForward f;
        f.encoder = encode_cached(m, xs[v]);
        f.decoder = decode_cached(m, f.encoder.latent);
        recon.push_back(f.decoder.output);
        fwd.push_back(std::move(f));
      }
      LossWithGrads rec = reconstruction_loss(xs, recon);
      const LossBreakdown part = total_loss(rec.value, 0.0, 0.0, 0.0, 0.0);
      check_finite(part, "pretrain", epoch, b);
      for (std::size_t v = 0; v < xs.size(); ++v) {
        backward(state.model.views[v], fwd[v], HeadGradients{std::move(rec.grads[v]), {}, {}});
      }
      adam_update(state, true);
      accumulate(sum, part, static_cast<double>(batches[b].size()) / static_cast<double>(n));
    }
    ++state.pretrain_epochs_done;
    state.history.push_back({state.epochs_done(), sum, mean_phi(state)});
  }
}

TrainState pretrain(const MultiViewDataset& dataset, const TrainConfig& config) {
  TrainState s = init_state(dataset, config);
  pretrain(s, dataset, config);
  return s;
}

DatasetForward forward_dataset(const ModelBundle& model, const MultiViewDataset& dataset) {
  DatasetForward out;
  for (std::size_t v = 0; v < dataset.num_views(); ++v) {
    const auto& m = model.views[v];
    const Matrix latent = encode(m, dataset.views[v]);
    out.z.push_back(project(m, latent).unit());
    out.probs.push_back(classify(m, latent).probs);
  }
  return out;
}

void init_classifier_heads(TrainState& state, const MultiViewDataset& dataset,
                           const TrainConfig& config) {
  const std::size_t k = dataset.num_clusters;
  std::vector<Matrix> latents;
  for (std::size_t v = 0; v < dataset.num_views(); ++v) {
    latents.push_back(encode(state.model.views[v], dataset.views[v]));
  }
  const KMeansResult km = kmeans(latents.front(), k, config.seed);

  for (std::size_t v = 0; v < latents.size(); ++v) {
    const Matrix& e = latents[v];
    Matrix centroids(k, e.cols());
    std::vector<double> counts(k, 0.0);
    for (std::size_t i = 0; i < e.rows(); ++i) {
      const auto c = static_cast<std::size_t>(km.labels[i]);
      counts[c] += 1.0;
      auto dst = centroids.row(c);
      auto src = e.row(i);
      for (std::size_t d = 0; d < src.size(); ++d) dst[d] += src[d];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0)
        for (auto& x : centroids.row(c)) x /= counts[c];

    double spread = 0.0;
    for (std::size_t i = 0; i < e.rows(); ++i) {
      auto src = e.row(i);
      auto cen = centroids.row(static_cast<std::size_t>(km.labels[i]));
      for (std::size_t d = 0; d < src.size(); ++d) spread += (src[d] - cen[d]) * (src[d] - cen[d]);
    }
    spread = std::max(spread / static_cast<double>(e.rows()), 1e-12);

    // logits_k = scale * (e . c_k - |c_k|^2 / 2) = -scale/2 |e - c_k|^2 + const(e)
    const double scale = config.head_init_scale / spread;
    ViewModel& m = state.model.views[v];
    for (std::size_t c = 0; c < k; ++c) {
      double sq = 0.0;
      for (std::size_t d = 0; d < centroids.cols(); ++d) {
        m.cls_w.value(d, c) = scale * centroids(c, d);
        sq += centroids(c, d) * centroids(c, d);
      }
      m.cls_b.value(0, c) = -0.5 * scale * sq;
    }
  }
}

void e_step(TrainState& state, const MultiViewDataset& dataset, const TrainConfig& config) {
  const std::size_t v_count = dataset.num_views();
  if (!config.rectification_enabled()) {
    state.phi.assign(v_count, std::vector<double>(dataset.num_samples(), 1.0));
    return;
  }
  const DatasetForward fwd = forward_dataset(state.model, dataset);
  const bool have_previous = state.cluster_gmms.size() == v_count;
  std::vector<ClusterGmm> gmms;
  for (std::size_t v = 0; v < v_count; ++v) {
    ViewNoiseEstimate est = estimate_view_noise(
        fwd.z[v], fwd.probs[v], have_previous ? &state.cluster_gmms[v] : nullptr,
        config.seed + 7919 * (v + 1));
    if (est.clean_gmm.degenerate) ++state.degenerate_fits;
    gmms.push_back(std::move(est.cluster_gmm));
    state.clean_scores[v] = std::move(est.scores);
    state.clean_gmms[v] = est.clean_gmm;
    state.phi[v] = std::move(est.phi);
  }
  state.cluster_gmms = std::move(gmms);
}

LossBreakdown batch_objective(ModelBundle& model, const MultiViewDataset& dataset,
                              std::span<const std::size_t> batch,
                              const std::vector<std::vector<double>>& phi,
                              const TrainConfig& config, const std::vector<Matrix>* frozen_targets,
                              const PairSelection* frozen_selection) {
  const std::size_t v_count = dataset.num_views();
  const auto xs = batch_views(dataset, batch);

  std::vector<ViewForward> fwd;
  std::vector<Matrix> recon, z, probs;
  for (std::size_t v = 0; v < v_count; ++v) {
    fwd.push_back(forward(model.views[v], xs[v]));
    recon.push_back(fwd.back().recon());
    z.push_back(fwd.back().z());
    probs.push_back(fwd.back().probs());
  }

  std::vector<HeadGradients> grads(v_count);
  LossWithGrads rec = reconstruction_loss(xs, recon);
  for (std::size_t v = 0; v < v_count; ++v) grads[v].recon = std::move(rec.grads[v]);

  double rectify = 0.0;
  if (config.rectification_enabled() && v_count >= 2) {
    std::vector<Matrix> targets;
    std::vector<Matrix> preds(probs.begin() + 1, probs.end());
    if (frozen_targets) {
      targets = *frozen_targets;
    } else {
      for (std::size_t v = 1; v < v_count; ++v) {
        std::vector<double> phi_batch(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) phi_batch[i] = phi[v][batch[i]];
        targets.push_back(mix_predictions(probs[v], probs[0], phi_batch));
      }
    }
    LossWithGrads rs = rectification_loss(targets, preds);
    rectify = rs.value;
    if (config.alpha != 0.0) {
      for (std::size_t v = 1; v < v_count; ++v) grads[v].probs = rs.grads[v - 1] * config.alpha;
    }
  }

  double contrastive = 0.0;
  std::size_t selected = 0;
  if (config.contrastive_enabled()) {
    const PairSelection selection =
        frozen_selection ? *frozen_selection : select_pairs(probs, config.tau);
    ContrastiveResult con = contrastive_loss(z, selection, config.similarity_clamp);
    contrastive = con.value;
    selected = con.selected_pair_count;
    if (config.beta != 0.0 && selected > 0) {
      for (std::size_t v = 0; v < v_count; ++v) grads[v].z = con.grads[v] * config.beta;
    }
  }

  for (std::size_t v = 0; v < v_count; ++v) backward(model.views[v], fwd[v], grads[v]);
  return total_loss(rec.value, rectify, contrastive, config.alpha, config.beta, selected);
}

EpochLog m_step_epoch(TrainState& state, const MultiViewDataset& dataset,
                      const TrainConfig& config) {
  const std::size_t n = dataset.num_samples();
  const std::size_t epoch = state.epochs_done();
  const auto batches = minibatch_iter(n, config.batch_size, config.seed, epoch);
  LossBreakdown sum;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    state.model.zero_grad();
    const LossBreakdown part =
        batch_objective(state.model, dataset, batches[b], state.phi, config);
    check_finite(part, "m_step", epoch, b);
    adam_update(state, false);
    accumulate(sum, part, static_cast<double>(batches[b].size()) / static_cast<double>(n));
  }
  ++state.train_epochs_done;
  EpochLog log{state.epochs_done(), sum, mean_phi(state)};
  state.history.push_back(log);
  return log;
}

ClusterResult assign_clusters(const TrainState& state, const MultiViewDataset& dataset,
                              bool phi_weighted) {
  DatasetForward fwd = forward_dataset(state.model, dataset);
  return fuse_predictions(std::move(fwd.probs), phi_weighted ? &state.phi : nullptr);
}

std::string format_epoch_log(const EpochLog& log) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu\t%.10g\t%.10g\t%.10g\t%.10g\t%zu", log.epoch,
                log.loss.recon, log.loss.rectify, log.loss.contrastive, log.loss.total,
                log.loss.selected_pair_count);
  std::string line = buf;
  for (double p : log.mean_phi) {
    std::snprintf(buf, sizeof(buf), "\t%.6f", p);
    line += buf;
  }
  return line;
}

NamedArrays state_arrays(const TrainState& state) {
  NamedArrays arrays = bundle_arrays(state.model);
  const auto params = state.model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const AdamState& a = state.optimizer[k];
    arrays.emplace("adam." + params[k]->name + ".m", a.first_moment);
    arrays.emplace("adam." + params[k]->name + ".v", a.second_moment);
    arrays.emplace("adam." + params[k]->name + ".t",
                   Matrix(1, 1, static_cast<double>(a.timestep)));
  }
  for (std::size_t v = 0; v < state.phi.size(); ++v) {
    arrays.emplace("phi.view" + std::to_string(v + 1),
                   Matrix::from_vector(1, state.phi[v].size(), state.phi[v]));
  }
  for (std::size_t v = 0; v < state.cluster_gmms.size(); ++v) {
    const auto& g = state.cluster_gmms[v];
    arrays.emplace("gmm.view" + std::to_string(v + 1) + ".means", g.means);
    arrays.emplace("gmm.view" + std::to_string(v + 1) + ".variances",
                   Matrix::from_vector(1, g.variances.size(), g.variances));
  }
  return arrays;
}

void write_checkpoint(const TrainState& state, const std::filesystem::path& file) {
  write_named_arrays(state_arrays(state), file);
}

TrainOutcome train(const MultiViewDataset& dataset, const TrainConfig& config,
                   const TrainOptions& options) {
  TrainOutcome out{init_state(dataset, config), {}, {}};
  TrainState& s = out.state;
  pretrain(s, dataset, config);
  if (options.log) {
    for (const auto& h : s.history) *options.log << format_epoch_log(h) << '\n';
  }
  if (config.centroid_head_init) init_classifier_heads(s, dataset, config);

  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);
  for (std::size_t e = 0; e < config.train_epochs; ++e) {
    e_step(s, dataset, config);
    const EpochLog log = m_step_epoch(s, dataset, config);
    if (options.log) *options.log << format_epoch_log(log) << '\n';
    if (options.checkpoint_dir && config.checkpoint_every > 0 &&
        s.train_epochs_done % config.checkpoint_every == 0) {
      write_checkpoint(s, *options.checkpoint_dir /
                              ("checkpoint_epoch" + std::to_string(s.train_epochs_done) + ".bin"));
    }
  }

  out.result = assign_clusters(s, dataset, config.phi_weighted_fusion);
  if (dataset.labels) {
    MetricsReport m = evaluate(out.result.assignments, *dataset.labels, dataset.num_clusters);
    m.dataset = dataset.name;
    m.seed = config.seed;
    m.ablation = to_string(config.ablation);
    out.metrics = m;
  }
  return out;
}

}  // namespace airmvc
