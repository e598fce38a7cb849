#include "cada/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>

#include "cada/checkpoint.hpp"
#include "cada/dataset.hpp"
#include "cada/errors.hpp"
#include "cada/losses.hpp"
#include "cada/mean_teacher.hpp"
#include "cada/metrics.hpp"

namespace cada {

Regime parse_regime(const std::string& name) {
  if (name == "L-SUP") return Regime::LSup;
  if (name == "JOINT") return Regime::Joint;
  if (name == "VSBN") return Regime::Vsbn;
  if (name == "SE-MT") return Regime::SeMt;
  if (name == "SS-CADA") return Regime::SsCada;
  throw UsageError("unknown regime '" + name + "' (valid: L-SUP, JOINT, VSBN, SE-MT, SS-CADA)");
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::LSup: return "L-SUP";
    case Regime::Joint: return "JOINT";
    case Regime::Vsbn: return "VSBN";
    case Regime::SeMt: return "SE-MT";
    case Regime::SsCada: return "SS-CADA";
  }
  return "?";
}

bool regime_uses_source(Regime r) {
  return r == Regime::Joint || r == Regime::Vsbn || r == Regime::SsCada;
}

bool regime_uses_unlabeled(Regime r) { return r == Regime::SeMt || r == Regime::SsCada; }

void TrainerConfig::validate() const {
  if (!(lr0 > 0.0)) throw std::invalid_argument("train.lr0 must be > 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("train.momentum must be in [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (n_source < 0 || n_target < 0 || n_unlabeled < 0)
    throw std::invalid_argument("train batch split counts must be >= 0");
  if (n_source + n_target + n_unlabeled != batch_size)
    throw std::invalid_argument(
        "train.n_source + train.n_target + train.n_unlabeled must equal train.batch_size");
  if (epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
  if (!(lr_decay > 0.0) || lr_decay > 1.0)
    throw std::invalid_argument("train.lr_decay must be in (0, 1]");
  if (ema_decay < 0.0 || ema_decay >= 1.0)
    throw std::invalid_argument("train.ema_decay must be in [0, 1)");
}

BatchPlan batch_plan(const TrainerConfig& cfg) {
  const int bs = cfg.batch_size;
  switch (cfg.regime) {
    case Regime::LSup: return {0, bs, 0};
    case Regime::Joint:
    case Regime::Vsbn: return {bs / 2, bs - bs / 2, 0};
    case Regime::SeMt: return {0, bs - bs / 2, bs / 2};
    case Regime::SsCada: return {cfg.n_source, cfg.n_target, cfg.n_unlabeled};
  }
  return {};
}

double lr_schedule(int epoch, const TrainerConfig& cfg) {
  return cfg.lr0 * std::pow(cfg.lr_decay, epoch);
}

DeckSampler::DeckSampler(int n, std::uint64_t seed) : rng_(seed) {
  if (n < 1) throw std::invalid_argument("DeckSampler: need at least one element");
  deck_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) deck_[static_cast<std::size_t>(i)] = i;
  rng_.shuffle(deck_);
}

std::vector<int> DeckSampler::draw(int k) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    if (cursor_ == deck_.size()) {
      rng_.shuffle(deck_);
      cursor_ = 0;
    }
    out.push_back(deck_[cursor_++]);
  }
  return out;
}

void sgd_momentum_step(const std::vector<Parameter*>& params, double lr, double momentum) {
  for (Parameter* p : params) {
    double* v = p->momentum.data();
    const double* g = p->grad.data();
    double* w = p->value.data();
    const int n = p->value.numel();
    for (int i = 0; i < n; ++i) {
      v[i] = momentum * v[i] + g[i];
      w[i] -= lr * v[i];
    }
    p->zero_grad();
  }
}

int rampup_t(int epoch, int epochs, int t_max) {
  if (epoch >= epochs - 1) return t_max;
  return std::min(epoch, t_max);
}

int iterations_per_epoch(int n_target_labeled, int n_target_unlabeled, const BatchPlan& plan) {
  const int denom = plan.n_target + plan.n_unlabeled;
  if (denom < 1) throw std::invalid_argument("batch plan must draw target-domain samples");
  const int pool = n_target_labeled + n_target_unlabeled;
  if (pool < 1) throw DataError("target splits are empty");
  return (pool + denom - 1) / denom;
}

namespace {

Tensor concat_batches(const Tensor& a, const Tensor& b) {
  std::vector<int> shape = a.shape();
  shape[0] += b.dim(0);
  Tensor out(shape);
  std::copy_n(a.data(), a.numel(), out.data());
  std::copy_n(b.data(), b.numel(), out.data() + a.numel());
  return out;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void append_ids(std::string& s, const std::vector<LoadedSample>& split,
                const std::vector<int>& idx) {
  for (const int i : idx) {
    if (!s.empty()) s += ' ';
    s += split[static_cast<std::size_t>(i)].id;
  }
}

}  // namespace

TrainResult train_model(const FullConfig& cfg, const std::string& data_dir,
                        const std::string& out_dir) {
  cfg.validate();
  const TrainerConfig& tc = cfg.train;
  const Regime regime = tc.regime;
  const BatchPlan plan = batch_plan(tc);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create output directory " + out_dir + ": " + ec.message());

  write_resolved_config(cfg, (std::filesystem::path(out_dir) / "config.resolved.txt").string());

  // Split sizes come from the manifest so the iteration count is computed
  // without touching files the regime must not read.
  const auto refs = read_manifest(data_dir);
  const int n_tl = static_cast<int>(filter_split(refs, kSplitTargetLabeled).size());
  const int n_tu = static_cast<int>(filter_split(refs, kSplitTargetUnlabeled).size());
  const int iters = iterations_per_epoch(n_tl, n_tu, plan);

  std::vector<LoadedSample> src, tgt, unl;
  tgt = load_split(data_dir, kSplitTargetLabeled);
  if (plan.n_source > 0) src = load_split(data_dir, kSplitSourceLabeled);
  if (plan.n_unlabeled > 0) unl = load_split(data_dir, kSplitTargetUnlabeled);
  const std::vector<LoadedSample> val = load_split(data_dir, kSplitVal);

  UNet net(cfg.net, mix_seed(tc.seed, "init"));
  TeacherState teacher;
  if (regime_has_teacher(regime)) teacher = TeacherState(net, tc.ema_decay);

  TrainResult res;
  res.out_dir = out_dir;
  res.best_checkpoint = (std::filesystem::path(out_dir) / "ckpt_best.ckpt").string();
  res.final_checkpoint = (std::filesystem::path(out_dir) / "ckpt_final.ckpt").string();
  res.log_path = (std::filesystem::path(out_dir) / "train_log.csv").string();

  std::ofstream log(res.log_path, std::ios::binary);
  if (!log) throw DataError("cannot write training log: " + res.log_path);
  log << "iter,epoch,lr,lambda,loss_s,loss_c,loss_total\n";

  const auto save_snapshot = [&](const std::string& path, int epoch, double val_dice) {
    const Tensor meta_epoch = Tensor::full({1}, static_cast<double>(epoch));
    const Tensor meta_val = Tensor::full({1}, val_dice);
    std::vector<std::pair<std::string, const Tensor*>> extra;
    if (teacher.initialized())
      for (const auto& e : teacher.checkpoint_entries()) extra.push_back(e);
    extra.emplace_back("meta.epoch", &meta_epoch);
    extra.emplace_back("meta.val_dice", &meta_val);
    save_network(path, net, extra);
  };

  const std::uint64_t perturb_seed = mix_seed(tc.seed, "perturb");
  long global_iter = 0;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, tc);
    const double lambda = lambda_rampup(rampup_t(epoch, tc.epochs, cfg.loss.t_max), cfg.loss);

    std::optional<DeckSampler> src_deck, tgt_deck, unl_deck;
    const auto deck_seed = [&](const char* tag) {
      return mix_seed(mix_seed(tc.seed, std::string_view(tag)),
                      static_cast<std::uint64_t>(epoch));
    };
    if (plan.n_source > 0) src_deck.emplace(static_cast<int>(src.size()), deck_seed("deck.source"));
    if (plan.n_target > 0) tgt_deck.emplace(static_cast<int>(tgt.size()), deck_seed("deck.target"));
    if (plan.n_unlabeled > 0)
      unl_deck.emplace(static_cast<int>(unl.size()), deck_seed("deck.unlabeled"));

    for (int it = 0; it < iters; ++it, ++global_iter) {
      std::vector<int> si, ti, ui;
      if (src_deck) si = src_deck->draw(plan.n_source);
      if (tgt_deck) ti = tgt_deck->draw(plan.n_target);
      if (unl_deck) ui = unl_deck->draw(plan.n_unlabeled);

      Tensor x_s, y_s, x_t, y_t;
      if (!si.empty()) {
        x_s = stack_images(src, si);
        y_s = stack_masks(src, si);
      }
      if (!ti.empty()) {
        x_t = stack_images(tgt, ti);
        y_t = stack_masks(tgt, ti);
      }

      net.zero_grad();
      double loss_s = 0.0;
      double loss_c = 0.0;

      switch (regime) {
        case Regime::LSup:
        case Regime::SeMt:
          loss_s = supervised_loss(net, nullptr, nullptr, &x_t, &y_t, cfg.loss, true);
          break;
        case Regime::Joint: {
          // one mixed batch through a single parameter view
          const Tensor x_all = si.empty() ? x_t : concat_batches(x_s, x_t);
          const Tensor y_all = si.empty() ? y_t : concat_batches(y_s, y_t);
          const Tensor p = net.predict(x_all, Domain::Target, Mode::Train);
          loss_s = hybrid_seg_loss(p, y_all, cfg.loss);
          net.backward(hybrid_seg_backward(p, y_all, cfg.loss));
          break;
        }
        case Regime::Vsbn:
        case Regime::SsCada:
          loss_s = supervised_loss(net, si.empty() ? nullptr : &x_s, si.empty() ? nullptr : &y_s,
                                   &x_t, &y_t, cfg.loss, true);
          break;
      }

      if (!ui.empty()) {
        const Tensor x_u = stack_images(unl, ui);
        const auto base = static_cast<std::uint64_t>(global_iter);
        loss_c = consistency_step(x_u, net, teacher, cfg.perturb, mix_seed(perturb_seed, 2 * base),
                                  mix_seed(perturb_seed, 2 * base + 1), true, lambda);
      }

      const double loss_total = loss_s + lambda * loss_c;
      if (!std::isfinite(loss_total)) {
        std::string ids;
        append_ids(ids, src, si);
        append_ids(ids, tgt, ti);
        append_ids(ids, unl, ui);
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " iteration " +
                           std::to_string(global_iter) + " (batch: " + ids + ")");
      }

      sgd_momentum_step(net.all_parameters(), lr, tc.momentum);
      if (teacher.initialized()) teacher.ema_update(net);

      log << global_iter << ',' << epoch << ',' << fmt17(lr) << ',' << fmt17(lambda) << ','
          << fmt17(loss_s) << ',' << fmt17(loss_c) << ',' << fmt17(loss_total) << '\n';
    }

    const double val_dice = evaluate_split(net, val, Domain::Target).mean.dice;
    if (res.best_epoch < 0 || val_dice > res.best_val_dice) {
      res.best_epoch = epoch;
      res.best_val_dice = val_dice;
      save_snapshot(res.best_checkpoint, epoch, val_dice);
    }
    res.final_val_dice = val_dice;
    if (teacher.initialized())
      res.teacher_val_dice = evaluate_split(teacher.network(), val, Domain::Target).mean.dice;
  }

  save_snapshot(res.final_checkpoint, tc.epochs - 1, res.final_val_dice);

  log.close();
  if (!log) throw DataError("training log write failed: " + res.log_path);
  return res;
}

}  // namespace cada
