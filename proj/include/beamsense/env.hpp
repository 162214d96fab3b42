#ifndef BEAMSENSE_ENV_HPP
#define BEAMSENSE_ENV_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace beamsense::env {

/// Uniform linear array codebook dimensions. Half-wavelength spacing is
/// assumed throughout.
struct CodebookConfig {
  int num_antennas = 8;
  int num_beams = 8;

  void validate() const;
};

/// One slot's line-of-sight channel: a single path with complex gain at a
/// given azimuth from boresight.
struct ChannelRealization {
  std::complex<double> gain{1.0, 0.0};
  double angle = 0.0;           // radians, strictly inside (-pi/2, pi/2)
  double noise_variance = 1.0;  // sigma^2 >= 0
  double tx_power = 1.0;        // P > 0
};

struct ChannelParams {
  double tx_power = 1.0;
  double noise_variance = 1.0;

  void validate() const;
};

/// One time slot of ground truth. `true_angle` is hidden state kept for
/// diagnostics; it is not part of the CSV interchange schema.
struct ScenarioSample {
  int slot = 0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();  // noisy observation
  Eigen::VectorXd embedding;                           // camera surrogate, D entries
  int label = 0;                                       // optimal beam index
  double true_angle = 0.0;
};

/// Straight-street UE motion with noisy position and camera-surrogate
/// observations. The UE advances one-directionally and re-enters at the
/// street start after passing the end, so long horizons sweep the angular
/// sector repeatedly.
struct TrajectoryConfig {
  int num_slots = 2000;
  double speed_min = 0.35;  // per-slot displacement range, metres
  double speed_max = 0.63;
  double position_noise_std = 1.0;
  int embedding_dim = 16;
  double embedding_noise_std = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Street geometry constants of the synthetic scenario. The BS sits at the
/// origin; the street runs parallel to the array at this perpendicular
/// distance.
inline constexpr double kStreetDistance = 10.0;
inline constexpr double kStreetHalfLength = 35.0;

/// ULA steering vector: entry n is exp(j*pi*n*sin(angle)) / sqrt(N).
/// Unit norm by construction. Throws std::domain_error for angles outside
/// the open interval (-pi/2, pi/2).
Eigen::VectorXcd steering_vector(double angle, int num_antennas);

/// DFT-grid codebook, uniform in sin-angle space: column m steers towards
/// asin(-1 + (2m+1)/M). Columns are unit norm.
Eigen::MatrixXcd dft_codebook(const CodebookConfig& config);

/// Boresight direction (in sin-angle space) of codeword m.
double beam_boresight_sin(int beam, int num_beams);

/// Channel vector realised from a ChannelRealization: gain times the
/// unnormalised array response.
Eigen::VectorXcd channel_vector(const ChannelRealization& channel, int num_antennas);

/// Received SNR P * |h^H f|^2 / sigma^2 for one codeword.
double beam_snr(const ChannelRealization& channel,
                const Eigen::Ref<const Eigen::VectorXcd>& codeword);

/// Index of the max-SNR codeword; ties break toward the smallest index.
int optimal_beam(const ChannelRealization& channel, const Eigen::MatrixXcd& codebook);

/// Deterministic camera-surrogate feature map: Fourier features of the true
/// angle, [cos(k*pi*sin a), sin(k*pi*sin a)] for k = 1..D/2 (noise-free part).
Eigen::VectorXd camera_embedding(double true_angle, int embedding_dim);

/// Generates the full synthetic trajectory. Deterministic given the seed.
std::vector<ScenarioSample> generate_trajectory(const TrajectoryConfig& traj,
                                                const CodebookConfig& cb,
                                                const ChannelParams& ch);

/// Expected column layout of a dataset CSV.
struct CsvSchema {
  int embedding_dim = 16;
  int num_beams = 8;
};

/// Parses a dataset CSV with header slot,pos_x,pos_y,emb_0..emb_{D-1},label.
/// Errors name the offending row and column.
std::vector<ScenarioSample> load_csv_dataset(const std::string& path,
                                             const CsvSchema& schema);

/// Writes samples in the load_csv_dataset schema. Doubles round-trip exactly.
void save_csv_dataset(const std::vector<ScenarioSample>& samples,
                      const std::string& path);

}  // namespace beamsense::env

#endif
