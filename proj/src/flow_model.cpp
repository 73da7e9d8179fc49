#include "ica_lab/flow_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ica_lab/metrics.hpp"
#include "ica_lab/rng.hpp"

namespace ica_lab {

namespace {

constexpr int H = kCondHidden;

struct CondResult {
  double m, sigma_raw, dm, dsig;
};

CondResult conditioner_eval(const double* p, double u, bool with_derivs) {
  const double* w_in = p;
  const double* b_hid = p + H;
  const double* w_shift = p + 2 * H;
  const double b_shift = p[3 * H];
  const double* w_scale = p + 3 * H + 1;
  const double b_scale = p[4 * H + 1];
  CondResult r{b_shift, b_scale, 0.0, 0.0};
  for (int i = 0; i < H; ++i) {
    double h = std::tanh(w_in[i] * u + b_hid[i]);
    r.m += w_shift[i] * h;
    r.sigma_raw += w_scale[i] * h;
    if (with_derivs) {
      double t = 1.0 - h * h;
      r.dm += w_shift[i] * t * w_in[i];
      r.dsig += w_scale[i] * t * w_in[i];
    }
  }
  return r;
}

void check_finite(const Eigen::Vector2d& v, int layer, const char* where) {
  if (!std::isfinite(v(0)) || !std::isfinite(v(1)))
    throw numeric_error(std::string("FlowModel: non-finite value in ") + where,
                        layer);
}

}  // namespace

FlowModel FlowModel::init(std::uint64_t seed, int n_layers) {
  if (n_layers < 1) throw argument_error("FlowModel: need at least one layer");
  FlowModel model;
  model.n_layers = n_layers;
  model.seed = seed;
  model.swap_after.resize(n_layers);
  model.cond_coord.assign(n_layers, 0);
  model.params.setZero(n_layers * kLayerParams);

  RngStream init_rng = RngStream::substream(seed, "init");
  RngStream perm_rng = RngStream::substream(seed, "permutations");
  for (int l = 0; l < n_layers; ++l) {
    double* p = model.params.data() + l * kLayerParams;
    for (int i = 0; i < H; ++i) p[i] = 0.1 * init_rng.normal();          // w_in
    for (int i = 0; i < H; ++i) p[2 * H + i] = 0.1 * init_rng.normal();  // w_shift
    for (int i = 0; i < H; ++i)
      p[3 * H + 1 + i] = 0.1 * init_rng.normal();                        // w_scale
  }

  // Random permutations between layers, with a validity constraint: a layer
  // only ever transforms the coordinate opposite its conditioner, so without
  // at least one swap strictly inside the stack one input coordinate would
  // pass through completely untouched and the model could not even match a
  // law with two non-Gaussian marginals.  Redraw (deterministically) until
  // the interior couples both coordinates.
  while (true) {
    for (int l = 0; l < n_layers; ++l)
      model.swap_after[l] = perm_rng.uniform() < 0.5 ? 1 : 0;
    if (n_layers < 2) break;
    bool coupled = false;
    for (int l = 0; l + 1 < n_layers; ++l) coupled = coupled || model.swap_after[l];
    if (coupled) break;
  }
  return model;
}

FlowModel::EvalResult FlowModel::forward(const Eigen::Vector2d& s) const {
  Eigen::Vector2d v = s;
  double log_det = 0.0;
  for (int l = 0; l < n_layers; ++l) {
    const int cc = cond_coord[l];
    CondResult c = conditioner_eval(layer_params(l), v(cc), false);
    double sig = soft_clamp(c.sigma_raw);
    v(1 - cc) = v(1 - cc) * std::exp(sig) + c.m;
    log_det += sig;
    if (swap_after[l]) std::swap(v(0), v(1));
    check_finite(v, l, "forward");
  }
  return {v, log_det};
}

FlowModel::EvalResult FlowModel::inverse(const Eigen::Vector2d& x) const {
  Eigen::Vector2d v = x;
  double log_det = 0.0;
  for (int l = n_layers - 1; l >= 0; --l) {
    if (swap_after[l]) std::swap(v(0), v(1));
    const int cc = cond_coord[l];
    CondResult c = conditioner_eval(layer_params(l), v(cc), false);
    double sig = soft_clamp(c.sigma_raw);
    v(1 - cc) = (v(1 - cc) - c.m) * std::exp(-sig);
    log_det += sig;
    check_finite(v, l, "inverse");
  }
  return {v, log_det};
}

double FlowModel::log_density(const Eigen::Vector2d& x) const {
  EvalResult inv = inverse(x);
  double base = -std::log(2.0 * M_PI) - 0.5 * inv.point.squaredNorm();
  return base - inv.log_det;
}

Eigen::Matrix2d FlowModel::jacobian(const Eigen::Vector2d& s) const {
  Eigen::Vector2d v = s;
  Eigen::Matrix2d jac = Eigen::Matrix2d::Identity();
  for (int l = 0; l < n_layers; ++l) {
    const int cc = cond_coord[l];
    CondResult c = conditioner_eval(layer_params(l), v(cc), true);
    double sig = soft_clamp(c.sigma_raw);
    double es = std::exp(sig);
    double dsig = soft_clamp_derivative(c.sigma_raw) * c.dsig;
    double alpha = v(1 - cc) * es * dsig + c.dm;
    Eigen::Matrix2d local = Eigen::Matrix2d::Zero();
    local(cc, cc) = 1.0;
    local(1 - cc, cc) = alpha;
    local(1 - cc, 1 - cc) = es;
    jac = local * jac;
    v(1 - cc) = v(1 - cc) * es + c.m;
    if (swap_after[l]) {
      jac.row(0).swap(jac.row(1));
      std::swap(v(0), v(1));
    }
    check_finite(v, l, "jacobian");
  }
  return jac;
}

double FlowModel::column_defect(const Eigen::Vector2d& s) const {
  return c_oct_pointwise(jacobian(s));
}

int FlowModel::orientation_sign() const {
  int sign = 1;
  for (int l = 0; l < n_layers; ++l)
    if (swap_after[l]) sign = -sign;
  return sign;
}

namespace {

class FlowForwardMap final : public SmoothMap {
 public:
  explicit FlowForwardMap(FlowModel model) : model_(std::move(model)) {
    set_domain(Domain::all(kFlowDim));
  }
  int dim() const override { return kFlowDim; }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& s) const override {
    return model_.forward(Eigen::Vector2d(s)).point;
  }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& s) const override {
    return model_.jacobian(Eigen::Vector2d(s));
  }
  bool has_inverse() const override { return true; }
  Eigen::VectorXd inverse(const Eigen::VectorXd& x) const override {
    return model_.inverse(Eigen::Vector2d(x)).point;
  }
  double log_abs_det_jacobian(const Eigen::VectorXd& s) const override {
    return model_.forward(Eigen::Vector2d(s)).log_det;
  }
  std::string name() const override { return "flow_model"; }

 private:
  FlowModel model_;
};

class FlowInverseMap final : public SmoothMap {
 public:
  explicit FlowInverseMap(FlowModel model) : model_(std::move(model)) {
    set_domain(Domain::all(kFlowDim));
  }
  int dim() const override { return kFlowDim; }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const override {
    return model_.inverse(Eigen::Vector2d(x)).point;
  }
  bool has_inverse() const override { return true; }
  Eigen::VectorXd inverse(const Eigen::VectorXd& s) const override {
    return model_.forward(Eigen::Vector2d(s)).point;
  }
  double log_abs_det_jacobian(const Eigen::VectorXd& x) const override {
    return -model_.inverse(Eigen::Vector2d(x)).log_det;
  }
  std::string name() const override { return "flow_model_inverse"; }

 private:
  FlowModel model_;
};

}  // namespace

MapPtr FlowModel::as_map() const { return std::make_shared<FlowForwardMap>(*this); }
MapPtr FlowModel::inverse_as_map() const {
  return std::make_shared<FlowInverseMap>(*this);
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string FlowModel::to_json(const std::string& config_hash) const {
  nlohmann::json j;
  j["format"] = "ica_lab.flow_checkpoint";
  j["version"] = 1;
  j["d"] = kFlowDim;
  j["n_layers"] = n_layers;
  j["hidden"] = kCondHidden;
  j["seed"] = seed;
  j["swap_after"] = swap_after;
  j["cond_coord"] = cond_coord;
  j["params"] = std::vector<double>(params.data(), params.data() + params.size());
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  return j.dump(2);
}

FlowModel FlowModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw schema_error(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "ica_lab.flow_checkpoint")
      throw schema_error("checkpoint: unknown format tag");
    if (j.at("version").get<int>() != 1)
      throw schema_error("checkpoint: unsupported version");
    if (j.at("d").get<int>() != kFlowDim || j.at("hidden").get<int>() != kCondHidden)
      throw schema_error("checkpoint: incompatible model shape");
    FlowModel model;
    model.n_layers = j.at("n_layers").get<int>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.swap_after = j.at("swap_after").get<std::vector<int>>();
    model.cond_coord = j.at("cond_coord").get<std::vector<int>>();
    std::vector<double> p = j.at("params").get<std::vector<double>>();
    if (model.n_layers < 1 ||
        static_cast<int>(model.swap_after.size()) != model.n_layers ||
        static_cast<int>(model.cond_coord.size()) != model.n_layers ||
        static_cast<int>(p.size()) != model.n_layers * kLayerParams)
      throw schema_error("checkpoint: shape fields disagree");
    model.params = Eigen::Map<Eigen::VectorXd>(p.data(), p.size());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw schema_error(std::string("checkpoint: missing or mistyped field: ") +
                       e.what());
  }
}

void FlowModel::save(const std::string& path, const std::string& config_hash) const {
  std::ofstream out(path);
  if (!out) throw error("FlowModel::save: cannot open " + path);
  out << to_json(config_hash) << "\n";
}

FlowModel FlowModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error("FlowModel::load: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace ica_lab
