#include "deepofdm/classical_rx.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace deepofdm {

namespace {

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

}  // namespace

CovarianceModel make_covariance(const TdlProfile& profile, int n_s, int n_cp, int n_t, double doppler_hz,
                                double delta_f) {
  CovarianceModel cov;
  cov.r_f = Eigen::MatrixXcd::Zero(n_s, n_s);
  for (int a = 0; a < n_s; ++a) {
    for (int b = 0; b < n_s; ++b) {
      cplx acc(0.0, 0.0);
      for (std::size_t i = 0; i < profile.delays.size(); ++i) {
        const long phase = (static_cast<long>(a - b) * profile.delays[i]) % n_s;
        acc += profile.powers[i] * std::polar(1.0, -2.0 * kPi * static_cast<double>(phase) / n_s);
      }
      cov.r_f(a, b) = acc;
    }
  }
  const double t_sym = static_cast<double>(n_s + n_cp) / (n_s * delta_f);
  cov.r_t = Eigen::MatrixXcd::Zero(n_t, n_t);
  for (int a = 0; a < n_t; ++a)
    for (int b = 0; b < n_t; ++b)
      cov.r_t(a, b) = std::cyl_bessel_j(0.0, 2.0 * kPi * doppler_hz * std::abs(a - b) * t_sym);
  return cov;
}

ChannelEstimate oracle_estimate(const ResourceGrid& h) {
  return ChannelEstimate{h, std::vector<double>(h.size(), 0.0)};
}

ChannelEstimate ls_estimate(const ResourceGrid& y, const PilotPattern& pattern, double n0,
                            std::optional<double> slope) {
  if (pattern.n_p() == 0) throw EstimatorError("LS estimation needs pilots; the 0P pattern has none");
  if (y.n_s != pattern.n_s || y.n_t != pattern.n_t) throw ConfigError("ls_estimate: grid and pattern differ in size");
  const double growth = slope.value_or(n0);
  ChannelEstimate est{ResourceGrid(y.n_s, y.n_t, GridRole::csi), std::vector<double>(y.size(), 0.0)};
  const auto& ps = pattern.pilot_symbols;
  for (int k = 0; k < y.n_s; ++k) {
    std::vector<cplx> at_pilot(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) at_pilot[i] = y.at(k, ps[i]) / pattern.values[k + ps[i] * y.n_s];
    for (int t = 0; t < y.n_t; ++t) {
      cplx h;
      if (t <= ps.front()) {
        h = at_pilot.front();
      } else if (t >= ps.back()) {
        h = at_pilot.back();
      } else {
        std::size_t j = 0;
        while (ps[j + 1] < t) ++j;
        const double w = static_cast<double>(t - ps[j]) / (ps[j + 1] - ps[j]);
        h = (1.0 - w) * at_pilot[j] + w * at_pilot[j + 1];
      }
      int dist = std::numeric_limits<int>::max();
      for (int p : ps) dist = std::min(dist, std::abs(t - p));
      est.h.at(k, t) = h;
      est.error_var[k + static_cast<std::size_t>(t) * y.n_s] = n0 + growth * dist;
    }
  }
  return est;
}

LmmseEstimator::LmmseEstimator(const CovarianceModel& cov, double truncation)
    : n_s_(static_cast<int>(cov.r_f.rows())), n_t_(static_cast<int>(cov.r_t.rows())) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ef(cov.r_f), et(cov.r_t);
  const Eigen::VectorXd lf = ef.eigenvalues(), lt = et.eigenvalues();
  const double top = std::max(lf.maxCoeff(), 0.0) * std::max(lt.maxCoeff(), 0.0);
  std::vector<std::pair<int, int>> keep;
  for (int i = 0; i < lf.size(); ++i)
    for (int j = 0; j < lt.size(); ++j)
      if (lf(i) * lt(j) > truncation * top) keep.emplace_back(i, j);
  lambda_.resize(static_cast<Eigen::Index>(keep.size()));
  basis_.resize(static_cast<Eigen::Index>(n_s_) * n_t_, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t q = 0; q < keep.size(); ++q) {
    const auto [i, j] = keep[q];
    lambda_(q) = lf(i) * lt(j);
    for (int t = 0; t < n_t_; ++t)
      for (int k = 0; k < n_s_; ++k) basis_(k + t * n_s_, q) = ef.eigenvectors()(k, i) * et.eigenvectors()(t, j);
  }
}

ChannelEstimate LmmseEstimator::estimate(const ResourceGrid& y, const std::vector<int>& observed, const CVec& d,
                                         const std::vector<double>& extra_var, double sigma2) const {
  if (y.n_s != n_s_ || y.n_t != n_t_) throw ConfigError("LMMSE: grid size differs from the covariance model");
  if (observed.empty()) throw EstimatorError("LMMSE estimation needs at least one observation");
  if (!(sigma2 > 0.0)) throw ConfigError("LMMSE: noise variance must be positive");
  const Eigen::Index r = lambda_.size();
  const auto n_obs = static_cast<Eigen::Index>(observed.size());
  Eigen::MatrixXcd g(n_obs, r);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(r);
  Eigen::VectorXd inv_noise(n_obs);
  for (Eigen::Index o = 0; o < n_obs; ++o) {
    inv_noise(o) = 1.0 / (sigma2 + extra_var[o]);
    g.row(o) = d[o] * basis_.row(observed[o]);
  }
  Eigen::VectorXcd yo(n_obs);
  for (Eigen::Index o = 0; o < n_obs; ++o) yo(o) = y.data[observed[o]] * inv_noise(o);
  Eigen::MatrixXcd m = g.adjoint() * inv_noise.asDiagonal() * g;
  m.diagonal() += lambda_.cwiseInverse().cast<cplx>();
  rhs = g.adjoint() * yo;

  Eigen::LLT<Eigen::MatrixXcd> llt(m);
  if (llt.info() != Eigen::Success) {
    std::cerr << "warning: LMMSE system is singular, applying diagonal loading 1e-9\n";
    m.diagonal().array() += 1e-9;
    llt.compute(m);
  }
  const Eigen::VectorXcd coeff = llt.solve(rhs);
  const Eigen::MatrixXcd post = llt.solve(Eigen::MatrixXcd::Identity(r, r));

  ChannelEstimate est{ResourceGrid(n_s_, n_t_, GridRole::csi), std::vector<double>(y.size(), 0.0)};
  const Eigen::VectorXcd h = basis_ * coeff;
  const Eigen::MatrixXcd bp = basis_ * post;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    est.h.data[i] = h(i);
    est.error_var[i] = std::max(0.0, bp.row(i).dot(basis_.row(i)).real());
  }
  return est;
}

ChannelEstimate LmmseEstimator::estimate(const ResourceGrid& y, const PilotPattern& pattern, double sigma2) const {
  if (pattern.n_p() == 0) throw EstimatorError("LMMSE estimation needs pilots; the 0P pattern has none");
  CVec d;
  d.reserve(pattern.pilot_indices.size());
  for (int idx : pattern.pilot_indices) d.push_back(pattern.values[idx]);
  return estimate(y, pattern.pilot_indices, d, std::vector<double>(pattern.pilot_indices.size(), 0.0), sigma2);
}

ChannelEstimate lmmse_estimate(const ResourceGrid& y, const PilotPattern& pattern, const CovarianceModel& cov,
                               double sigma2) {
  return LmmseEstimator(cov).estimate(y, pattern, sigma2);
}

DemapResult mmse_equalize_demap(const ResourceGrid& y, const ChannelEstimate& est, double n0, double gamma_ici,
                                const Constellation& c, const PilotPattern& pattern, const std::vector<double>* prior) {
  const int m = c.m;
  const int n_data = pattern.data_count();
  if (est.h.size() != y.size()) throw ConfigError("demap: estimate does not cover the grid");
  if (prior && prior->size() != static_cast<std::size_t>(n_data) * m) throw FramingError("demap: prior size mismatch");
  const double n0_eff = n0 + gamma_ici;
  DemapResult out;
  out.llr.assign(static_cast<std::size_t>(n_data) * m, 0.0);
  out.x_hat.resize(static_cast<std::size_t>(n_data));
  out.post_var.resize(static_cast<std::size_t>(n_data));
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> metric(static_cast<std::size_t>(c.size()));
  for (int i = 0; i < n_data; ++i) {
    const int idx = pattern.data_indices[i];
    const cplx h = est.h.data[idx];
    const cplx yk = y.data[idx];
    const double denom = std::norm(h) + n0_eff;
    out.x_hat[i] = denom > 0.0 ? std::conj(h) * yk / denom : cplx(0.0, 0.0);
    out.post_var[i] = denom > 0.0 ? n0_eff / denom : 1.0;
    double s2 = est.error_var[idx] + n0_eff;
    if (!(s2 > 0.0)) {
      if (h == cplx(0.0, 0.0)) continue;  // no information
      s2 = 1e-12;
    }
    const double* pr = prior ? prior->data() + static_cast<std::size_t>(i) * m : nullptr;
    for (int p = 0; p < c.size(); ++p) {
      double v = -std::norm(yk - h * c.points[p]) / s2;
      if (pr) {
        for (int j = 0; j < m; ++j) v += c.bit(p, j) * pr[j];
      }
      metric[p] = v;
    }
    for (int j = 0; j < m; ++j) {
      double one = ninf, zero = ninf;
      for (int p = 0; p < c.size(); ++p) (c.bit(p, j) ? one : zero) = log_sum_exp(c.bit(p, j) ? one : zero, metric[p]);
      double l = one - zero;
      if (pr) l -= pr[j];
      out.llr[static_cast<std::size_t>(i) * m + j] = l;
    }
  }
  return out;
}

void symbol_moments(const Constellation& c, const double* bit_llrs, cplx& mean, double& second_moment) {
  double top = -std::numeric_limits<double>::infinity();
  std::vector<double> w(static_cast<std::size_t>(c.size()));
  for (int p = 0; p < c.size(); ++p) {
    double v = 0.0;
    for (int j = 0; j < c.m; ++j) v += c.bit(p, j) * bit_llrs[j];
    w[p] = v;
    top = std::max(top, v);
  }
  double total = 0.0;
  mean = cplx(0.0, 0.0);
  second_moment = 0.0;
  for (int p = 0; p < c.size(); ++p) {
    const double e = std::exp(w[p] - top);
    total += e;
    mean += e * c.points[p];
    second_moment += e * std::norm(c.points[p]);
  }
  mean /= total;
  second_moment /= total;
}

std::vector<DecodeResult> decode_blocks(const std::vector<double>& llr, const LdpcCode& code, const BlockLayout& layout,
                                        int decoder_iters) {
  std::vector<DecodeResult> out;
  out.reserve(static_cast<std::size_t>(layout.blocks));
  for (int b = 0; b < layout.blocks; ++b) {
    const auto first = llr.begin() + static_cast<std::ptrdiff_t>(b) * code.n();
    out.push_back(ldpc_decode(std::vector<double>(first, first + code.n()), code, decoder_iters));
  }
  return out;
}

IeddResult iedd_receive(const ResourceGrid& y, const PilotPattern& pattern, const LmmseEstimator& estimator,
                        double n0, double gamma_ici, const Constellation& c, const LdpcCode& code,
                        const BlockLayout& layout, int n_outer, int decoder_iters) {
  if (n_outer < 1) throw ConfigError("IEDD needs at least one outer iteration");
  const double sigma2 = n0 + gamma_ici;
  const int m = c.m;
  IeddResult res;
  res.estimate = estimator.estimate(y, pattern, sigma2);
  auto demap = mmse_equalize_demap(y, res.estimate, n0, gamma_ici, c, pattern);
  res.llr = demap.llr;

  const std::size_t coded = static_cast<std::size_t>(layout.blocks) * code.n();
  std::vector<double> prior(res.llr.size(), 0.0);
  for (int outer = 1; outer <= n_outer; ++outer) {
    res.outer_iterations = outer;
    res.blocks = decode_blocks(res.llr, code, layout, decoder_iters);
    res.converged = std::all_of(res.blocks.begin(), res.blocks.end(), [](const auto& b) { return b.converged; });
    if (res.converged || outer == n_outer) break;

    // Decoder extrinsic information becomes the bit prior.
    std::fill(prior.begin(), prior.end(), 0.0);
    for (std::size_t i = 0; i < coded; ++i) {
      const auto& blk = res.blocks[i / code.n()];
      prior[i] = blk.app[i % code.n()] - res.llr[i];
    }
    std::vector<int> observed = pattern.pilot_indices;
    CVec d;
    std::vector<double> extra;
    for (int idx : pattern.pilot_indices) {
      d.push_back(pattern.values[idx]);
      extra.push_back(0.0);
    }
    for (int i = 0; i < pattern.data_count(); ++i) {
      cplx mean;
      double second;
      symbol_moments(c, prior.data() + static_cast<std::size_t>(i) * m, mean, second);
      if (std::norm(mean) < 1e-12) continue;
      observed.push_back(pattern.data_indices[i]);
      d.push_back(mean);
      extra.push_back(std::max(0.0, second - std::norm(mean)));
    }
    res.estimate = estimator.estimate(y, observed, d, extra, sigma2);
    demap = mmse_equalize_demap(y, res.estimate, n0, gamma_ici, c, pattern, &prior);
    res.llr = demap.llr;
  }
  return res;
}

}  // namespace deepofdm
