#include "floodtile/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace floodtile {

Adam::Adam(std::vector<Param<float>*> params, AdamConfig cfg) : cfg_(cfg) {
  for (auto* p : params)
    if (!p->running_stat) params_.push_back(p);
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i]->flat().size(), 0.0f);
    v_[i].assign(params_[i]->flat().size(), 0.0f);
  }
}

void Adam::step() {
  ++step_count_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_count_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_count_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param<float>& p = *params_[i];
    auto& val = p.flat();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < val.size(); ++j) {
      float g = p.grad[j];
      if (!std::isfinite(g))
        throw std::runtime_error("adam: non-finite gradient in parameter '" + p.name + "'");
      m[j] = float(cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g);
      v[j] = float(cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * double(g) * g);
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      val[j] = float(val[j] - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

Adam::State Adam::state() const { return {step_count_, m_, v_}; }

void Adam::restore(const State& s) {
  if (s.m.size() != m_.size() || s.v.size() != v_.size())
    throw std::runtime_error("adam: state shape mismatch");
  step_count_ = s.step_count;
  m_ = s.m;
  v_ = s.v;
}

PlateauScheduler::PlateauScheduler(double initial_lr, double factor, int patience, double min_lr)
    : lr_(initial_lr), factor_(factor), min_lr_(min_lr), patience_(patience) {
  if (initial_lr <= 0 || factor <= 0 || factor >= 1 || patience < 0)
    throw std::invalid_argument("scheduler: bad configuration");
}

double PlateauScheduler::observe(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    stale_ = 0;
  } else if (++stale_ > patience_) {
    lr_ = std::max(lr_ * factor_, min_lr_);
    stale_ = 0;
  }
  return lr_;
}

EarlyStopper::EarlyStopper(int patience) : patience_(patience) {
  if (patience < 1) throw std::invalid_argument("early stopper: patience must be >= 1");
}

bool EarlyStopper::observe(double val_loss, const UNet& model) {
  ++epoch_;
  if (val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epoch_;
    counter_ = 0;
    best_state_.clear();
    for (const auto* p : model.params()) best_state_.push_back(p->flat());
    return false;
  }
  return ++counter_ >= patience_;
}

void EarlyStopper::restore_best(UNet& model) const {
  if (best_state_.empty()) throw std::runtime_error("early stopper: no snapshot recorded");
  auto params = model.params();
  if (params.size() != best_state_.size())
    throw std::runtime_error("early stopper: snapshot/model mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i]->flat().size() != best_state_[i].size())
      throw std::runtime_error("early stopper: snapshot/model mismatch");
    params[i]->flat() = best_state_[i];
  }
}

}  // namespace floodtile
