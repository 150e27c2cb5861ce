#pragma once

#include <Eigen/Dense>
#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bullbear/errors.hpp"
#include "bullbear/regime.hpp"

namespace bullbear {

// Model variants compared in the study. The Markov-switching variants share
// one sampler; GARCH(1,1) lives in its own module.
enum class ModelKind { Ms4, Ms4Unrestricted, Ms4T, Ms2, Garch11 };

struct ModelSpec {
  ModelKind kind = ModelKind::Ms4;

  int states() const {
    switch (kind) {
      case ModelKind::Ms2:
        return 2;
      case ModelKind::Garch11:
        return 0;
      default:
        return 4;
    }
  }

  bool is_markov_switching() const { return kind != ModelKind::Garch11; }
  bool student_t() const { return kind == ModelKind::Ms4T; }

  // Zero cells in P and the long-run regime-mean inequalities apply to the
  // restricted 4-state variants only. Mean sign restrictions identify the
  // state labels in every MS variant.
  bool has_zero_mask() const {
    return kind == ModelKind::Ms4 || kind == ModelKind::Ms4T;
  }
  bool longrun_restricted() const { return has_zero_mask(); }

  regime::ZeroMask zero_mask() const {
    return has_zero_mask() ? regime::ms4_zero_mask() : regime::ZeroMask{};
  }

  std::string label() const {
    switch (kind) {
      case ModelKind::Ms4:
        return "MS4";
      case ModelKind::Ms4Unrestricted:
        return "MS4U";
      case ModelKind::Ms4T:
        return "MS4T";
      case ModelKind::Ms2:
        return "MS2";
      case ModelKind::Garch11:
        return "GARCH11";
    }
    return "?";
  }

  static ModelSpec parse(const std::string& name) {
    std::string n;
    for (char c : name) n += char(std::tolower(static_cast<unsigned char>(c)));
    if (n == "ms4") return {ModelKind::Ms4};
    if (n == "ms4u" || n == "ms4-unrestricted" || n == "ms4_unrestricted")
      return {ModelKind::Ms4Unrestricted};
    if (n == "ms4t" || n == "ms4-t") return {ModelKind::Ms4T};
    if (n == "ms2") return {ModelKind::Ms2};
    if (n == "garch" || n == "garch11") return {ModelKind::Garch11};
    throw UsageError("unknown model '" + name +
                     "' (expected ms4, ms4u, ms4t, ms2, garch)");
  }
};

// Prior hyperparameters for the Gibbs sampler. The source study defers to
// earlier published priors without printing values, so these defaults are
// weakly informative stand-ins; every field is overridable.
struct PriorSpec {
  std::vector<double> mu_mean;       // per state
  std::vector<double> mu_var;        // per state
  std::vector<double> sigma2_shape;  // inverse-gamma shape per state
  std::vector<double> sigma2_scale;  // inverse-gamma scale per state
  Eigen::MatrixXd row_conc;          // Dirichlet concentrations, masked cells 0
  std::vector<double> nu_grid;       // t-variant grid for d.o.f.

  static PriorSpec defaults(const ModelSpec& spec) {
    const int k = spec.states();
    PriorSpec p;
    p.mu_mean.assign(k, 0.0);
    p.mu_var.assign(k, 1.0);
    p.sigma2_shape.assign(k, 2.5);
    p.sigma2_scale.assign(k, 2.5);
    p.row_conc = Eigen::MatrixXd::Constant(k, k, 2.0);
    for (int i = 0; i < k; ++i) p.row_conc(i, i) = 8.0;
    for (const auto& [i, j] : spec.zero_mask()) p.row_conc(i, j) = 0.0;
    if (spec.student_t())
      for (int v = 3; v <= 40; ++v) p.nu_grid.push_back(double(v));
    return p;
  }

  void validate(const ModelSpec& spec) const {
    const int k = spec.states();
    auto check_len = [&](const std::vector<double>& v, const char* name) {
      if (int(v.size()) != k)
        throw DataError(std::string("prior field ") + name +
                        " has wrong length");
    };
    check_len(mu_mean, "mu_mean");
    check_len(mu_var, "mu_var");
    check_len(sigma2_shape, "sigma2_shape");
    check_len(sigma2_scale, "sigma2_scale");
    for (double v : mu_var)
      if (!(v > 0.0)) throw DataError("mu_var must be positive");
    for (double v : sigma2_shape)
      if (!(v > 0.0)) throw DataError("sigma2_shape must be positive");
    for (double v : sigma2_scale)
      if (!(v > 0.0)) throw DataError("sigma2_scale must be positive");
    if (row_conc.rows() != k || row_conc.cols() != k)
      throw DataError("row_conc has wrong shape");
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        bool masked = false;
        for (const auto& [a, b] : spec.zero_mask())
          if (a == i && b == j) masked = true;
        if (masked && row_conc(i, j) != 0.0)
          throw DataError("masked cell carries Dirichlet concentration");
        if (!masked && !(row_conc(i, j) > 0.0))
          throw DataError("unmasked Dirichlet concentration must be positive");
      }
    if (spec.student_t()) {
      if (nu_grid.empty()) throw DataError("t-variant requires a nu grid");
      for (double v : nu_grid)
        if (!(v > 2.0)) throw DataError("nu grid values must exceed 2");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["mu_mean"] = mu_mean;
    j["mu_var"] = mu_var;
    j["sigma2_shape"] = sigma2_shape;
    j["sigma2_scale"] = sigma2_scale;
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < row_conc.rows(); ++i) {
      std::vector<double> r(row_conc.cols());
      for (int c = 0; c < row_conc.cols(); ++c) r[c] = row_conc(i, c);
      rows.push_back(std::move(r));
    }
    j["row_conc"] = rows;
    if (!nu_grid.empty()) j["nu_grid"] = nu_grid;
    return j;
  }

  static PriorSpec from_json(const nlohmann::json& j, const ModelSpec& spec) {
    PriorSpec p = defaults(spec);
    if (j.contains("mu_mean")) p.mu_mean = j["mu_mean"].get<std::vector<double>>();
    if (j.contains("mu_var")) p.mu_var = j["mu_var"].get<std::vector<double>>();
    if (j.contains("sigma2_shape"))
      p.sigma2_shape = j["sigma2_shape"].get<std::vector<double>>();
    if (j.contains("sigma2_scale"))
      p.sigma2_scale = j["sigma2_scale"].get<std::vector<double>>();
    if (j.contains("row_conc")) {
      auto rows = j["row_conc"].get<std::vector<std::vector<double>>>();
      const int k = int(rows.size());
      p.row_conc.resize(k, k);
      for (int i = 0; i < k; ++i)
        for (int c = 0; c < k; ++c) p.row_conc(i, c) = rows[i].at(c);
    }
    if (j.contains("nu_grid"))
      p.nu_grid = j["nu_grid"].get<std::vector<double>>();
    p.validate(spec);
    return p;
  }
};

struct McmcConfig {
  int burn_in = 5000;
  int retained = 30000;
  std::uint64_t seed = 20201125;
  int max_rejections = 1000;  // per-block cap for the long-run rejection loop

  void validate() const {
    if (burn_in < 0) throw UsageError("burn_in must be >= 0");
    if (retained < 1) throw UsageError("retained must be >= 1");
    if (max_rejections < 1) throw UsageError("max_rejections must be >= 1");
  }
};

}  // namespace bullbear
