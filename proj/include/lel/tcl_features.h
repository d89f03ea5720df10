#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lel/random.h"
#include "lel/trace.h"

namespace lel {

// Samples are stored time-major: sample t of channel c sits at t * C + c.
struct Window {
  std::vector<double> samples;
  long origin = 0;
  int channels = 1;
};

std::vector<Window> segment_windows(const Trace& trace, int length, int stride);
// Default stride for a window length: half of it, at least one.
int default_stride(int length);

std::pair<Window, Window> augment(const Window& window, double scale_lo, double scale_hi, double noise_frac, Rng& rng);

// Two-layer network: u = (x - shift) / scale, a = tanh(W1 u + b1), z = W2 a + b2.
// shift/scale are fitted on the training data and then frozen with the weights.
struct Encoder {
  int window_length = 0;
  int channels = 1;
  Eigen::VectorXd shift;
  Eigen::VectorXd scale;
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  int input_size() const { return window_length * channels; }
  int hidden() const { return static_cast<int>(w1.rows()); }
  int dim() const { return static_cast<int>(w2.rows()); }

  // Zero weights, unit scale. Used as a starting point and in tests.
  static Encoder zeros(int window_length, int channels, int hidden, int dim);
};

Eigen::VectorXd encode(const Encoder& encoder, const Window& window);
// Rows are the embeddings of the windows, in order.
Eigen::MatrixXd encode_all(const Encoder& encoder, const std::vector<Window>& windows);

// Sum over rows of the InfoNCE term with cosine similarity; rows of z1 and z2 are paired.
double contrastive_loss(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2, double temperature);

// Weights flattened in the order w1 (column-major), b1, w2, b2.
std::vector<double> flatten_weights(const Encoder& encoder);
void set_weights(Encoder& encoder, const std::vector<double>& flat);

// Contrastive loss of a batch of paired views (columns of x1, x2 are raw windows)
// and, if grad is non-null, its exact gradient with respect to flatten_weights.
double contrastive_objective(const Encoder& encoder, const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2,
                             double temperature, std::vector<double>* grad);

struct TclConfig {
  int dim = 64;
  int hidden = 128;
  double temperature = 0.1;
  int epochs = 200;
  int batch = 64;
  double step_size = 1e-2;
  double scale_lo = 0.8;
  double scale_hi = 1.2;
  double noise_frac = 0.05;

  void validate() const;
};

// Plain SGD on the batch-mean loss. epoch_loss, if given, receives the mean
// per-window loss on one fixed set of augmented views: before training, then
// after each epoch.
Encoder train_encoder(const std::vector<Window>& windows, const TclConfig& cfg, std::uint64_t seed,
                      std::vector<double>* epoch_loss = nullptr);

struct PatternVector {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;

  Eigen::VectorXd flat() const;
  double squared_distance(const PatternVector& other) const;
};

PatternVector pattern_vector(const Eigen::MatrixXd& embeddings);

// Convenience: window a single-channel series and summarise it with the encoder.
PatternVector series_pattern(const Encoder& encoder, const std::vector<double>& series, int stride);

std::string serialize_encoder(const Encoder& encoder);
Encoder parse_encoder(const std::string& text);

}  // namespace lel
