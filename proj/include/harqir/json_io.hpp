#pragma once

// JSON round-tripping for ChannelSpec and fitted approximations.
// Needs nlohmann/json ("json.hpp") on the include path.

#include <json.hpp>

#include <string>
#include <vector>

#include "harqir/channel.hpp"
#include "harqir/error.hpp"
#include "harqir/gammafit.hpp"

namespace harq {

inline nlohmann::ordered_json channel_to_json(const ChannelSpec& s) {
  return {{"sigma", s.sigma}, {"lambda", s.lambda}, {"snr_db", s.snr_db}};
}

inline ChannelSpec channel_from_json(const nlohmann::json& j) {
  try {
    return ChannelSpec(j.at("sigma").get<std::vector<double>>(), j.at("lambda").get<std::vector<double>>(),
                       j.at("snr_db").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("channel: ") + e.what());
  }
}

/// The fields needed to evaluate the mixture again: zeta, theta, N, eta, kappa.
inline nlohmann::ordered_json approx_to_json(const MutualInfoApprox& a) {
  return {{"zeta", a.basis.zeta}, {"theta", a.basis.theta}, {"N", a.degree}, {"eta", a.eta}, {"kappa", a.kappa}};
}

/// Restores a fit from approx_to_json output. The orthogonal basis is rebuilt
/// from (zeta, theta, N); moments and the Delta sequence are not stored.
inline MutualInfoApprox approx_from_json(const nlohmann::json& j) {
  MutualInfoApprox a;
  try {
    a.basis = GammaBasis::make(j.at("zeta").get<double>(), j.at("theta").get<double>(), 2 * kDegreeCap + 1);
    a.degree = j.at("N").get<int>();
    a.eta = j.at("eta").get<std::vector<double>>();
    a.kappa = j.at("kappa").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("fit: ") + e.what());
  }
  detail::require(a.degree >= 0 && a.degree <= kDegreeCap, "fit: N out of range");
  detail::require(a.eta.size() == static_cast<std::size_t>(a.degree) + 1 &&
                      a.kappa.size() == static_cast<std::size_t>(a.degree) + 1,
                  "fit: eta and kappa must have N+1 entries");
  a.ortho = build_ortho_basis(a.basis, a.degree);
  double s = 0.0;
  for (double k : a.kappa) s += k;
  a.kappa_sum = s;
  return a;
}

}  // namespace harq
