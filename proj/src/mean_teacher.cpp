#include "cada/mean_teacher.hpp"

#include <stdexcept>

#include "cada/errors.hpp"
#include "cada/losses.hpp"
#include "cada/ops.hpp"
#include "cada/rng.hpp"

namespace cada {

void PerturbConfig::validate() const {
  if (noise_sigma < 0.0) throw std::invalid_argument("PerturbConfig: noise_sigma must be >= 0");
  if (flip_prob < 0.0 || flip_prob > 1.0)
    throw std::invalid_argument("PerturbConfig: flip_prob must be in [0,1]");
}

PerturbResult perturb(const Tensor& x, const PerturbConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  PerturbResult out;
  out.flipped = rng.bernoulli(cfg.flip_prob);
  out.x = out.flipped ? hflip(x) : x;
  if (cfg.noise_sigma > 0.0) {
    for (int i = 0; i < out.x.numel(); ++i) {
      const double v = out.x[i] + cfg.noise_sigma * rng.normal();
      out.x[i] = std::min(1.0, std::max(0.0, v));
    }
  }
  return out;
}

TeacherState::TeacherState(const UNet& student, double decay)
    : net_(std::make_unique<UNet>(student)), decay_(decay) {
  if (decay < 0.0 || decay >= 1.0)
    throw std::invalid_argument("TeacherState: decay must be in [0,1)");
  for (const auto& [name, t] : net_->target_view()) {
    (void)t;
    keys_.push_back(name);
  }
  net_->force_target_stats_valid();
  refresh_step_tensor();
}

void TeacherState::refresh_step_tensor() {
  step_count_tensor_ = Tensor::full({1}, static_cast<double>(step_count_));
}

void TeacherState::ema_update(const UNet& student) {
  if (!initialized()) throw std::logic_error("TeacherState: ema_update before initialization");
  auto shadow = net_->target_view();
  auto src = const_cast<UNet&>(student).target_view();
  if (shadow.size() != src.size())
    throw std::invalid_argument("TeacherState: student parameter view size mismatch");
  for (std::size_t i = 0; i < shadow.size(); ++i) {
    if (shadow[i].first != src[i].first)
      throw std::invalid_argument("TeacherState: key mismatch '" + shadow[i].first + "' vs '" +
                                  src[i].first + "'");
    Tensor& sh = *shadow[i].second;
    const Tensor& st = *src[i].second;
    if (!sh.same_shape(st))
      throw std::invalid_argument("TeacherState: shape mismatch for '" + shadow[i].first + "'");
    for (int k = 0; k < sh.numel(); ++k) sh[k] = decay_ * sh[k] + (1.0 - decay_) * st[k];
  }
  ++step_count_;
  refresh_step_tensor();
}

Tensor TeacherState::predict(const Tensor& x) const {
  if (!initialized()) throw std::logic_error("TeacherState: predict before initialization");
  return net_->predict_eval(x, Domain::Target);
}

const UNet& TeacherState::network() const {
  if (!initialized()) throw std::logic_error("TeacherState: network before initialization");
  return *net_;
}

std::vector<std::pair<std::string, const Tensor*>> TeacherState::checkpoint_entries() const {
  if (!initialized()) throw std::logic_error("TeacherState: checkpoint_entries before init");
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (const auto& [name, t] : net_->target_view()) out.emplace_back("teacher." + name, t);
  out.emplace_back("teacher.step_count", &step_count_tensor_);
  return out;
}

TeacherState TeacherState::restore(const UNet& student, double decay,
                                   const std::vector<CheckpointEntry>& entries) {
  TeacherState t(student, decay);
  auto shadow = t.net_->target_view();
  std::size_t applied = 0;
  for (const auto& e : entries) {
    if (e.name.rfind("teacher.", 0) != 0) continue;
    const std::string key = e.name.substr(8);
    if (key == "step_count") {
      if (e.tensor.numel() != 1) throw DataError("teacher.step_count must be a single value");
      t.step_count_ = static_cast<long>(e.tensor[0]);
      t.refresh_step_tensor();
      continue;
    }
    bool found = false;
    for (auto& [name, tensor] : shadow) {
      if (name != key) continue;
      if (!tensor->same_shape(e.tensor))
        throw DataError("teacher entry '" + e.name + "' has shape " + shape_str(e.tensor) +
                        ", expected " + shape_str(*tensor));
      *tensor = e.tensor;
      found = true;
      ++applied;
      break;
    }
    if (!found) throw DataError("teacher entry '" + e.name + "' matches no TARGET parameter");
  }
  if (applied != shadow.size())
    throw DataError("teacher restore: " + std::to_string(applied) + " of " +
                    std::to_string(shadow.size()) + " TARGET parameters present");
  t.net_->force_target_stats_valid();
  return t;
}

double consistency_step(const Tensor& x_unlabeled, UNet& student, const TeacherState& teacher,
                        const PerturbConfig& cfg, std::uint64_t seed_student,
                        std::uint64_t seed_teacher, bool backprop, double grad_scale) {
  if (!teacher.initialized())
    throw std::logic_error("consistency_step: teacher not initialized");
  const PerturbResult ps_in = perturb(x_unlabeled, cfg, seed_student);
  const PerturbResult pt_in = perturb(x_unlabeled, cfg, seed_teacher);
  Tensor ps = student.predict(ps_in.x, Domain::Target, Mode::Train);
  Tensor pt = teacher.predict(pt_in.x);
  // un-flip to the unperturbed orientation before comparing
  const Tensor ps_al = ps_in.flipped ? hflip(ps) : ps;
  const Tensor pt_al = pt_in.flipped ? hflip(pt) : pt;
  const double loss = consistency_mse(ps_al, pt_al);
  if (backprop) {
    Tensor g = consistency_mse_backward(ps_al, pt_al);
    g.scale_(grad_scale);
    if (ps_in.flipped) g = hflip(g);
    student.backward(g);
  }
  return loss;
}

}  // namespace cada
