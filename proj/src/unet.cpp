#include "cada/unet.hpp"

#include <cmath>
#include <stdexcept>

#include "cada/rng.hpp"

namespace cada {

void NetworkConfig::validate() const {
  if (depth < 2) throw std::invalid_argument("NetworkConfig: depth must be >= 2");
  if (base_channels < 1) throw std::invalid_argument("NetworkConfig: base_channels must be >= 1");
  if (in_channels < 1 || out_channels < 1)
    throw std::invalid_argument("NetworkConfig: channel counts must be >= 1");
}

ConvBlock::ConvBlock(int cin, int cout, const std::string& id)
    : w(Tensor::zeros({cout, cin, 3, 3}), "theta." + id + ".weight"),
      b(Tensor::zeros({cout}), "theta." + id + ".bias"),
      bn(cout, id) {}

Tensor ConvBlock::forward_train(const Tensor& x, Domain d) {
  in_cache_ = x;
  Tensor z = conv2d_forward(x, w.value, b.value, 1, 1);
  pre_relu_cache_ = bn.forward_train(z, d);
  return relu(pre_relu_cache_);
}

Tensor ConvBlock::forward_eval(const Tensor& x, Domain d) const {
  return relu(bn.forward_eval(conv2d_forward(x, w.value, b.value, 1, 1), d));
}

Tensor ConvBlock::backward(const Tensor& gout) {
  Tensor g = relu_backward(pre_relu_cache_, gout);
  g = bn.backward(g);
  return conv2d_backward(in_cache_, w.value, 1, 1, g, w.grad, b.grad);
}

namespace {
void kaiming_init(Tensor& w, Rng& rng) {
  const int fan_in = w.dim(1) * w.dim(2) * w.dim(3);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (int i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
}
}  // namespace

UNet::UNet(const NetworkConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      bottleneck_((cfg.validate(), cfg.base_channels << (cfg.depth - 1)),
                  cfg.base_channels << cfg.depth, "bottleneck"),
      head_w_(Tensor::zeros({cfg.out_channels, cfg.base_channels, 1, 1}), "theta.head.weight"),
      head_b_(Tensor::zeros({cfg.out_channels}), "theta.head.bias") {
  enc_.reserve(static_cast<std::size_t>(cfg.depth));
  for (int l = 0; l < cfg.depth; ++l) {
    const int cin = l == 0 ? cfg.in_channels : cfg.base_channels << (l - 1);
    const int cout = cfg.base_channels << l;
    enc_.emplace_back(cin, cout, "enc" + std::to_string(l));
  }
  dec_.reserve(static_cast<std::size_t>(cfg.depth));
  for (int l = 0; l < cfg.depth; ++l) {
    const int skip_ch = cfg.base_channels << l;
    const int up_ch = cfg.base_channels << (l + 1);
    dec_.emplace_back(up_ch + skip_ch, skip_ch, "dec" + std::to_string(l));
  }
  up_channels_.assign(static_cast<std::size_t>(cfg.depth), 0);

  Rng rng(seed);
  for (Level* lv : levels_in_order()) {
    kaiming_init(lv->b0.w.value, rng);
    kaiming_init(lv->b1.w.value, rng);
  }
  kaiming_init(head_w_.value, rng);
}

std::vector<UNet::Level*> UNet::levels_in_order() {
  std::vector<Level*> out;
  for (auto& lv : enc_) out.push_back(&lv);
  out.push_back(&bottleneck_);
  for (int l = cfg_.depth - 1; l >= 0; --l) out.push_back(&dec_[static_cast<std::size_t>(l)]);
  return out;
}

std::vector<const UNet::Level*> UNet::levels_in_order() const {
  std::vector<const Level*> out;
  for (auto& lv : enc_) out.push_back(&lv);
  out.push_back(&bottleneck_);
  for (int l = cfg_.depth - 1; l >= 0; --l) out.push_back(&dec_[static_cast<std::size_t>(l)]);
  return out;
}

void UNet::check_input(const Tensor& x) const {
  if (x.ndim() != 4 || x.dim(1) != cfg_.in_channels)
    throw std::invalid_argument("UNet: expected [N," + std::to_string(cfg_.in_channels) +
                                ",H,W] input, got " + shape_str(x));
  const int div = 1 << cfg_.depth;
  if (x.dim(2) % div != 0 || x.dim(3) % div != 0)
    throw std::invalid_argument("UNet: spatial dims of " + shape_str(x) +
                                " must be divisible by " + std::to_string(div));
}

Tensor UNet::predict(const Tensor& x, Domain d, Mode mode) {
  if (mode == Mode::Eval) return predict_eval(x, d);
  check_input(x);
  skips_.clear();
  pools_.clear();
  Tensor h = x;
  for (int l = 0; l < cfg_.depth; ++l) {
    h = enc_[static_cast<std::size_t>(l)].b0.forward_train(h, d);
    h = enc_[static_cast<std::size_t>(l)].b1.forward_train(h, d);
    skips_.push_back(h);
    pools_.push_back(maxpool2(h));
    h = pools_.back().out;
  }
  h = bottleneck_.b0.forward_train(h, d);
  h = bottleneck_.b1.forward_train(h, d);
  for (int l = cfg_.depth - 1; l >= 0; --l) {
    h = upsample2(h);
    up_channels_[static_cast<std::size_t>(l)] = h.dim(1);
    h = channel_concat(h, skips_[static_cast<std::size_t>(l)]);
    h = dec_[static_cast<std::size_t>(l)].b0.forward_train(h, d);
    h = dec_[static_cast<std::size_t>(l)].b1.forward_train(h, d);
  }
  head_in_cache_ = h;
  head_out_cache_ = sigmoid(conv2d_forward(h, head_w_.value, head_b_.value, 1, 0));
  has_cache_ = true;
  return head_out_cache_;
}

Tensor UNet::predict_eval(const Tensor& x, Domain d) const {
  check_input(x);
  std::vector<Tensor> skips;
  Tensor h = x;
  for (int l = 0; l < cfg_.depth; ++l) {
    h = enc_[static_cast<std::size_t>(l)].b0.forward_eval(h, d);
    h = enc_[static_cast<std::size_t>(l)].b1.forward_eval(h, d);
    skips.push_back(h);
    h = maxpool2(h).out;
  }
  h = bottleneck_.b0.forward_eval(h, d);
  h = bottleneck_.b1.forward_eval(h, d);
  for (int l = cfg_.depth - 1; l >= 0; --l) {
    h = upsample2(h);
    h = channel_concat(h, skips[static_cast<std::size_t>(l)]);
    h = dec_[static_cast<std::size_t>(l)].b0.forward_eval(h, d);
    h = dec_[static_cast<std::size_t>(l)].b1.forward_eval(h, d);
  }
  return sigmoid(conv2d_forward(h, head_w_.value, head_b_.value, 1, 0));
}

Tensor UNet::backward(const Tensor& gout) {
  if (!has_cache_) throw std::logic_error("UNet: backward requires a TRAIN-mode predict first");
  Tensor g = sigmoid_backward(head_out_cache_, gout);
  g = conv2d_backward(head_in_cache_, head_w_.value, 1, 0, g, head_w_.grad, head_b_.grad);
  std::vector<Tensor> skip_grads(static_cast<std::size_t>(cfg_.depth));
  for (int l = 0; l < cfg_.depth; ++l) {
    g = dec_[static_cast<std::size_t>(l)].b1.backward(g);
    g = dec_[static_cast<std::size_t>(l)].b0.backward(g);
    auto [gup, gskip] = channel_concat_backward(g, up_channels_[static_cast<std::size_t>(l)]);
    skip_grads[static_cast<std::size_t>(l)] = std::move(gskip);
    g = upsample2_backward(gup);
  }
  g = bottleneck_.b1.backward(g);
  g = bottleneck_.b0.backward(g);
  for (int l = cfg_.depth - 1; l >= 0; --l) {
    g = maxpool2_backward(pools_[static_cast<std::size_t>(l)], g);
    g.add_(skip_grads[static_cast<std::size_t>(l)]);
    g = enc_[static_cast<std::size_t>(l)].b1.backward(g);
    g = enc_[static_cast<std::size_t>(l)].b0.backward(g);
  }
  return g;
}

std::vector<Parameter*> UNet::parameters(Domain d) {
  std::vector<Parameter*> out;
  for (Level* lv : levels_in_order()) {
    for (ConvBlock* blk : {&lv->b0, &lv->b1}) {
      out.push_back(&blk->w);
      out.push_back(&blk->b);
      out.push_back(&blk->bn.gamma(d));
      out.push_back(&blk->bn.beta(d));
    }
  }
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

std::vector<const Parameter*> UNet::parameters(Domain d) const {
  auto* self = const_cast<UNet*>(this);
  std::vector<const Parameter*> out;
  for (Parameter* p : self->parameters(d)) out.push_back(p);
  return out;
}

std::vector<Parameter*> UNet::all_parameters() {
  std::vector<Parameter*> out;
  for (Level* lv : levels_in_order()) {
    for (ConvBlock* blk : {&lv->b0, &lv->b1}) {
      out.push_back(&blk->w);
      out.push_back(&blk->b);
      for (Domain d : {Domain::Source, Domain::Target}) {
        out.push_back(&blk->bn.gamma(d));
        out.push_back(&blk->bn.beta(d));
      }
    }
  }
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

void UNet::zero_grad() {
  for (Parameter* p : all_parameters()) p->zero_grad();
}

std::vector<VsbnLayer*> UNet::vsbn_layers() {
  std::vector<VsbnLayer*> out;
  for (Level* lv : levels_in_order()) {
    out.push_back(&lv->b0.bn);
    out.push_back(&lv->b1.bn);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> UNet::named_state() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (Level* lv : levels_in_order()) {
    for (ConvBlock* blk : {&lv->b0, &lv->b1}) {
      out.emplace_back(blk->w.name, &blk->w.value);
      out.emplace_back(blk->b.name, &blk->b.value);
      for (Domain d : {Domain::Source, Domain::Target}) {
        const std::string base = "vsbn." + blk->bn.id() + "." + domain_name(d) + ".";
        out.emplace_back(base + "gamma", &blk->bn.gamma(d).value);
        out.emplace_back(base + "beta", &blk->bn.beta(d).value);
        out.emplace_back(base + "running_mean", &blk->bn.running_mean(d));
        out.emplace_back(base + "running_var", &blk->bn.running_var(d));
        out.emplace_back(base + "stat_count", &blk->bn.stat_count(d));
      }
    }
  }
  out.emplace_back(head_w_.name, &head_w_.value);
  out.emplace_back(head_b_.name, &head_b_.value);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> UNet::named_state() const {
  auto* self = const_cast<UNet*>(this);
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : self->named_state()) out.emplace_back(name, t);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> UNet::target_view() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (Level* lv : levels_in_order()) {
    for (ConvBlock* blk : {&lv->b0, &lv->b1}) {
      out.emplace_back(blk->w.name, &blk->w.value);
      out.emplace_back(blk->b.name, &blk->b.value);
      const std::string base = "vsbn." + blk->bn.id() + ".TARGET.";
      out.emplace_back(base + "gamma", &blk->bn.gamma(Domain::Target).value);
      out.emplace_back(base + "beta", &blk->bn.beta(Domain::Target).value);
      out.emplace_back(base + "running_mean", &blk->bn.running_mean(Domain::Target));
      out.emplace_back(base + "running_var", &blk->bn.running_var(Domain::Target));
    }
  }
  out.emplace_back(head_w_.name, &head_w_.value);
  out.emplace_back(head_b_.name, &head_b_.value);
  return out;
}

void UNet::force_target_stats_valid() {
  for (VsbnLayer* bn : vsbn_layers())
    if (bn->stat_updates(Domain::Target) == 0) bn->stat_count(Domain::Target)[0] = 1.0;
}

long UNet::parameter_entry_count(Domain d) const {
  long n = 0;
  for (const Parameter* p : parameters(d)) n += p->value.numel();
  return n;
}

}  // namespace cada
