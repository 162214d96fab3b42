#include "beamsense/env.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "beamsense/util.hpp"

namespace beamsense::env {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

std::string row_col(int row, const std::string& col) {
  return "row " + std::to_string(row) + ", column " + col;
}

}  // namespace

void CodebookConfig::validate() const {
  if (num_antennas < 1) {
    throw std::invalid_argument("scenario.num_antennas must be >= 1");
  }
  if (num_beams < 2) {
    throw std::invalid_argument("scenario.num_beams must be >= 2");
  }
}

void ChannelParams::validate() const {
  if (!(tx_power > 0.0)) {
    throw std::invalid_argument("scenario.tx_power must be > 0");
  }
  if (!(noise_variance >= 0.0)) {
    throw std::invalid_argument("scenario.noise_variance must be >= 0");
  }
}

void TrajectoryConfig::validate() const {
  if (num_slots < 1) {
    throw std::invalid_argument("scenario.num_slots must be >= 1");
  }
  if (!(speed_min > 0.0) || !(speed_max >= speed_min)) {
    throw std::invalid_argument(
        "scenario speed range must satisfy 0 < speed_min <= speed_max");
  }
  if (!(position_noise_std >= 0.0)) {
    throw std::invalid_argument("scenario.position_noise_std must be >= 0");
  }
  if (embedding_dim < 1) {
    throw std::invalid_argument("scenario.embedding_dim must be >= 1");
  }
  if (!(embedding_noise_std >= 0.0)) {
    throw std::invalid_argument("scenario.embedding_noise_std must be >= 0");
  }
}

Eigen::VectorXcd steering_vector(double angle, int num_antennas) {
  if (!(angle > -kHalfPi && angle < kHalfPi)) {
    throw std::domain_error("steering_vector: angle must lie strictly inside (-pi/2, pi/2)");
  }
  if (num_antennas < 1) {
    throw std::invalid_argument("steering_vector: num_antennas must be >= 1");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(num_antennas));
  const double phase_step = std::numbers::pi * std::sin(angle);
  Eigen::VectorXcd v(num_antennas);
  for (int n = 0; n < num_antennas; ++n) {
    v(n) = std::polar(scale, phase_step * n);
  }
  return v;
}

double beam_boresight_sin(int beam, int num_beams) {
  return -1.0 + (2.0 * beam + 1.0) / num_beams;
}

Eigen::MatrixXcd dft_codebook(const CodebookConfig& config) {
  config.validate();
  Eigen::MatrixXcd codebook(config.num_antennas, config.num_beams);
  for (int m = 0; m < config.num_beams; ++m) {
    const double s = beam_boresight_sin(m, config.num_beams);
    codebook.col(m) = steering_vector(std::asin(s), config.num_antennas);
  }
  return codebook;
}

Eigen::VectorXcd channel_vector(const ChannelRealization& channel, int num_antennas) {
  const double root_n = std::sqrt(static_cast<double>(num_antennas));
  return channel.gain * root_n * steering_vector(channel.angle, num_antennas);
}

double beam_snr(const ChannelRealization& channel,
                const Eigen::Ref<const Eigen::VectorXcd>& codeword) {
  if (channel.noise_variance == 0.0) {
    throw std::domain_error("beam_snr: noise variance must be nonzero");
  }
  if (channel.noise_variance < 0.0) {
    throw std::domain_error("beam_snr: noise variance must be >= 0");
  }
  const Eigen::VectorXcd h = channel_vector(channel, static_cast<int>(codeword.size()));
  const std::complex<double> inner = h.adjoint() * codeword;
  return channel.tx_power * std::norm(inner) / channel.noise_variance;
}

int optimal_beam(const ChannelRealization& channel, const Eigen::MatrixXcd& codebook) {
  int best = 0;
  double best_snr = -1.0;
  for (int m = 0; m < codebook.cols(); ++m) {
    const double snr = beam_snr(channel, codebook.col(m));
    if (snr > best_snr) {
      best_snr = snr;
      best = m;
    }
  }
  return best;
}

Eigen::VectorXd camera_embedding(double true_angle, int embedding_dim) {
  Eigen::VectorXd emb(embedding_dim);
  const double s = std::sin(true_angle);
  for (int i = 0; i < embedding_dim; ++i) {
    const double k = static_cast<double>(i / 2 + 1);
    const double arg = k * std::numbers::pi * s;
    emb(i) = (i % 2 == 0) ? std::cos(arg) : std::sin(arg);
  }
  return emb;
}

std::vector<ScenarioSample> generate_trajectory(const TrajectoryConfig& traj,
                                                const CodebookConfig& cb,
                                                const ChannelParams& ch) {
  traj.validate();
  cb.validate();
  ch.validate();

  const Eigen::MatrixXcd codebook = dft_codebook(cb);
  std::mt19937_64 rng(traj.seed);
  std::uniform_real_distribution<double> speed(traj.speed_min, traj.speed_max);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<ScenarioSample> samples;
  samples.reserve(traj.num_slots);

  double x = -kStreetHalfLength;
  for (int t = 0; t < traj.num_slots; ++t) {
    ScenarioSample s;
    s.slot = t;
    s.true_angle = std::atan(x / kStreetDistance);

    ChannelRealization channel;
    channel.gain = std::polar(1.0, phase(rng));
    channel.angle = s.true_angle;
    channel.tx_power = ch.tx_power;
    channel.noise_variance = ch.noise_variance;
    s.label = optimal_beam(channel, codebook);

    s.position = Eigen::Vector2d(x, kStreetDistance);
    if (traj.position_noise_std > 0.0) {
      s.position(0) += traj.position_noise_std * gauss(rng);
      s.position(1) += traj.position_noise_std * gauss(rng);
    }

    s.embedding = camera_embedding(s.true_angle, traj.embedding_dim);
    if (traj.embedding_noise_std > 0.0) {
      for (int i = 0; i < traj.embedding_dim; ++i) {
        s.embedding(i) += traj.embedding_noise_std * gauss(rng);
      }
    }

    samples.push_back(std::move(s));

    x += speed(rng);
    if (x > kStreetHalfLength) {
      x -= 2.0 * kStreetHalfLength;  // re-enter at the street start
    }
  }
  return samples;
}

std::vector<ScenarioSample> load_csv_dataset(const std::string& path,
                                             const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_csv_dataset: cannot open " + path);
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_csv_dataset: empty file " + path);
  }

  std::vector<std::string> expected{"slot", "pos_x", "pos_y"};
  for (int i = 0; i < schema.embedding_dim; ++i) {
    expected.push_back("emb_" + std::to_string(i));
  }
  expected.push_back("label");

  const std::vector<std::string> header = split(trim(line), ',');
  if (header.size() != expected.size()) {
    throw std::runtime_error("load_csv_dataset: header has " +
                             std::to_string(header.size()) + " columns, expected " +
                             std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (trim(header[i]) != expected[i]) {
      throw std::runtime_error("load_csv_dataset: missing column '" + expected[i] +
                               "' (found '" + trim(header[i]) + "')");
    }
  }

  std::vector<ScenarioSample> samples;
  int row = 1;
  while (std::getline(in, line)) {
    const std::string trimmed = trim(line);
    if (trimmed.empty()) {
      ++row;
      continue;
    }
    const std::vector<std::string> cells = split(trimmed, ',');
    if (cells.size() != expected.size()) {
      throw std::runtime_error("load_csv_dataset: row " + std::to_string(row) +
                               " has " + std::to_string(cells.size()) +
                               " cells, expected " + std::to_string(expected.size()));
    }
    ScenarioSample s;
    s.slot = static_cast<int>(parse_int(cells[0], row_col(row, "slot")));
    s.position(0) = parse_double(cells[1], row_col(row, "pos_x"));
    s.position(1) = parse_double(cells[2], row_col(row, "pos_y"));
    s.embedding.resize(schema.embedding_dim);
    for (int i = 0; i < schema.embedding_dim; ++i) {
      s.embedding(i) = parse_double(cells[3 + i], row_col(row, "emb_" + std::to_string(i)));
    }
    const long long label =
        parse_int(cells[3 + schema.embedding_dim], row_col(row, "label"));
    if (label < 0 || label >= schema.num_beams) {
      throw std::runtime_error("load_csv_dataset: label out of range [0, " +
                               std::to_string(schema.num_beams) + ") at " +
                               row_col(row, "label"));
    }
    s.label = static_cast<int>(label);
    s.true_angle = std::numeric_limits<double>::quiet_NaN();  // not in schema
    samples.push_back(std::move(s));
    ++row;
  }
  return samples;
}

void save_csv_dataset(const std::vector<ScenarioSample>& samples,
                      const std::string& path) {
  if (samples.empty()) {
    throw std::invalid_argument("save_csv_dataset: no samples");
  }
  const int dim = static_cast<int>(samples.front().embedding.size());
  std::ostringstream out;
  out << "slot,pos_x,pos_y";
  for (int i = 0; i < dim; ++i) {
    out << ",emb_" << i;
  }
  out << ",label\n";
  for (const ScenarioSample& s : samples) {
    out << s.slot << ',' << format_double(s.position(0)) << ','
        << format_double(s.position(1));
    for (int i = 0; i < dim; ++i) {
      out << ',' << format_double(s.embedding(i));
    }
    out << ',' << s.label << '\n';
  }
  write_file(path, out.str());
}

}  // namespace beamsense::env
