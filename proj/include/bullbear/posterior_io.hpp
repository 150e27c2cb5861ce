#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bullbear/gibbs.hpp"

namespace bullbear::mcmc {

// Binary posterior container: a short magic, a JSON header carrying the model
// spec, priors, MCMC settings and the data fingerprint, then fixed-width
// little-endian draw records (mu, sigma, [nu], P row-major, state path as
// bytes). `thin` stores every n-th draw.

inline constexpr char kPosteriorMagic[6] = {'B', 'B', 'P', 'S', '1', '\n'};

namespace detail {

inline void write_doubles(std::ofstream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p),
            std::streamsize(n * sizeof(double)));
}

inline void read_doubles(std::ifstream& in, double* p, std::size_t n) {
  in.read(reinterpret_cast<char*>(p), std::streamsize(n * sizeof(double)));
  if (!in) throw DataError("truncated posterior file");
}

}  // namespace detail

inline void save_posterior(const PosteriorSample& sample,
                           const std::string& path, int thin = 1) {
  if (thin < 1) throw UsageError("thin must be >= 1");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open file for writing: " + path);

  std::size_t stored = 0;
  for (std::size_t i = 0; i < sample.draws.size(); i += std::size_t(thin))
    ++stored;
  const int k = sample.spec.states();
  const std::size_t t_len =
      sample.draws.empty() ? 0 : sample.draws.front().state_path.size();

  nlohmann::json h;
  h["format"] = 1;
  h["model"] = sample.spec.label();
  h["k"] = k;
  h["t"] = t_len;
  h["n_draws"] = stored;
  h["thin"] = thin;
  h["mcmc"] = {{"burn_in", sample.cfg.burn_in},
               {"retained", sample.cfg.retained},
               {"seed", sample.cfg.seed},
               {"max_rejections", sample.cfg.max_rejections}};
  char hash_hex[19];
  std::snprintf(hash_hex, sizeof(hash_hex), "0x%016llx",
                static_cast<unsigned long long>(sample.data_hash));
  h["data_hash"] = hash_hex;
  h["priors"] = sample.priors.to_json();
  h["has_nu"] = sample.spec.student_t();
  h["diagnostics"] = {
      {"longrun_rejections", sample.diagnostics.longrun_rejections},
      {"longrun_exhaustions", sample.diagnostics.longrun_exhaustions}};
  std::string header = h.dump();

  out.write(kPosteriorMagic, sizeof(kPosteriorMagic));
  std::uint32_t len = std::uint32_t(header.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), std::streamsize(header.size()));

  std::vector<double> prow(std::size_t(k) * k);
  for (std::size_t i = 0; i < sample.draws.size(); i += std::size_t(thin)) {
    const PosteriorDraw& d = sample.draws[i];
    detail::write_doubles(out, d.params.mu.data(), std::size_t(k));
    detail::write_doubles(out, d.params.sigma.data(), std::size_t(k));
    if (sample.spec.student_t())
      detail::write_doubles(out, d.params.nu->data(), std::size_t(k));
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) prow[std::size_t(a) * k + b] = d.P.p(a, b);
    detail::write_doubles(out, prow.data(), prow.size());
    out.write(reinterpret_cast<const char*>(d.state_path.data()),
              std::streamsize(d.state_path.size()));
  }
  if (!out) throw DataError("failed writing posterior file " + path);
}

inline PosteriorSample load_posterior(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  char magic[sizeof(kPosteriorMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kPosteriorMagic, sizeof(magic)) != 0)
    throw DataError("not a posterior file: " + path);
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header(len, '\0');
  in.read(header.data(), std::streamsize(len));
  if (!in) throw DataError("truncated posterior header in " + path);
  nlohmann::json h = nlohmann::json::parse(header);

  PosteriorSample s;
  s.spec = ModelSpec::parse(h.at("model").get<std::string>());
  const int k = h.at("k").get<int>();
  const std::size_t t_len = h.at("t").get<std::size_t>();
  const std::size_t n_draws = h.at("n_draws").get<std::size_t>();
  s.cfg.burn_in = h.at("mcmc").at("burn_in").get<int>();
  s.cfg.retained = h.at("mcmc").at("retained").get<int>();
  s.cfg.seed = h.at("mcmc").at("seed").get<std::uint64_t>();
  s.cfg.max_rejections = h.at("mcmc").at("max_rejections").get<int>();
  s.data_hash = std::stoull(h.at("data_hash").get<std::string>(), nullptr, 16);
  s.priors = PriorSpec::from_json(h.at("priors"), s.spec);
  if (h.contains("diagnostics")) {
    s.diagnostics.longrun_rejections =
        h["diagnostics"].value("longrun_rejections", 0L);
    s.diagnostics.longrun_exhaustions =
        h["diagnostics"].value("longrun_exhaustions", 0L);
  }
  const bool has_nu = h.at("has_nu").get<bool>();

  s.draws.resize(n_draws);
  std::vector<double> prow(std::size_t(k) * k);
  for (std::size_t i = 0; i < n_draws; ++i) {
    PosteriorDraw& d = s.draws[i];
    d.params.mu.resize(k);
    d.params.sigma.resize(k);
    detail::read_doubles(in, d.params.mu.data(), std::size_t(k));
    detail::read_doubles(in, d.params.sigma.data(), std::size_t(k));
    if (has_nu) {
      d.params.nu = std::vector<double>(k);
      detail::read_doubles(in, d.params.nu->data(), std::size_t(k));
    }
    detail::read_doubles(in, prow.data(), prow.size());
    d.P.p.resize(k, k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) d.P.p(a, b) = prow[std::size_t(a) * k + b];
    d.P.zero_mask = s.spec.zero_mask();
    d.state_path.resize(t_len);
    in.read(reinterpret_cast<char*>(d.state_path.data()),
            std::streamsize(t_len));
    if (!in) throw DataError("truncated posterior draws in " + path);
  }
  return s;
}

}  // namespace bullbear::mcmc
