#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "deepofdm/channel.hpp"
#include "deepofdm/fec.hpp"
#include "deepofdm/ofdm_grid.hpp"

namespace deepofdm {

struct ChannelEstimate {
  ResourceGrid h;
  std::vector<double> error_var;  // per RE, storage order
};

/// Separable prior R = R_F (x) R_T on the grid.
struct CovarianceModel {
  Eigen::MatrixXcd r_f;  // n_s x n_s
  Eigen::MatrixXcd r_t;  // n_t x n_t
};

/// R_F from the DFT of the power-delay profile, R_T(dt) = J0(2 pi f_d dt T_sym).
CovarianceModel make_covariance(const TdlProfile& profile, int n_s, int n_cp, int n_t, double doppler_hz,
                                double delta_f);

/// Perfect CSI: the true H with zero error variance.
ChannelEstimate oracle_estimate(const ResourceGrid& h);

/// Y / P on pilots, linear interpolation in time between pilot symbols and
/// constant extension outside. The error variance is n0 on pilot symbols and
/// grows by `slope` per symbol of distance to the nearest pilot symbol.
ChannelEstimate ls_estimate(const ResourceGrid& y, const PilotPattern& pattern, double n0,
                            std::optional<double> slope = std::nullopt);

/// LMMSE estimation in the eigenbasis of R. Observations y_o = d_o h_o + n_o
/// with n_o ~ CN(0, sigma2 + extra_var_o).
class LmmseEstimator {
 public:
  explicit LmmseEstimator(const CovarianceModel& cov, double truncation = 1e-10);

  int rank() const { return static_cast<int>(lambda_.size()); }

  ChannelEstimate estimate(const ResourceGrid& y, const std::vector<int>& observed, const CVec& d,
                           const std::vector<double>& extra_var, double sigma2) const;

  /// Pilot-only estimate.
  ChannelEstimate estimate(const ResourceGrid& y, const PilotPattern& pattern, double sigma2) const;

 private:
  int n_s_, n_t_;
  Eigen::MatrixXcd basis_;   // (n_s n_t) x rank, storage-order rows
  Eigen::VectorXd lambda_;
};

ChannelEstimate lmmse_estimate(const ResourceGrid& y, const PilotPattern& pattern, const CovarianceModel& cov,
                               double sigma2);

struct DemapResult {
  std::vector<double> llr;    // data RE i, bit j at i * m + j; positive favours 1
  CVec x_hat;                 // one-tap LMMSE equalized symbols
  std::vector<double> post_var;
};

/// One-tap equalization and exact log-sum-exp demapping with
/// sigma_k^2 = error_var_k + n0 + gamma_ici. `prior` (same layout as llr)
/// adds a-priori bit information; the returned LLRs are then extrinsic.
DemapResult mmse_equalize_demap(const ResourceGrid& y, const ChannelEstimate& est, double n0, double gamma_ici,
                                const Constellation& c, const PilotPattern& pattern,
                                const std::vector<double>* prior = nullptr);

/// Symbol mean and second moment under independent bit priors.
void symbol_moments(const Constellation& c, const double* bit_llrs, cplx& mean, double& second_moment);

struct IeddResult {
  std::vector<double> llr;               // demapper LLRs of the last pass
  std::vector<DecodeResult> blocks;
  bool converged = false;
  int outer_iterations = 0;
  ChannelEstimate estimate;
};

/// Iterative estimation, demapping and decoding. Blocks occupy the first
/// layout.blocks * N bits of the data REs; padding bits carry no prior.
IeddResult iedd_receive(const ResourceGrid& y, const PilotPattern& pattern, const LmmseEstimator& estimator,
                        double n0, double gamma_ici, const Constellation& c, const LdpcCode& code,
                        const BlockLayout& layout, int n_outer = 3, int decoder_iters = 20);

/// Decodes every block from a data-RE LLR vector.
std::vector<DecodeResult> decode_blocks(const std::vector<double>& llr, const LdpcCode& code, const BlockLayout& layout,
                                        int decoder_iters = 20);

}  // namespace deepofdm
