#include "lel/tcl_features.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lel/errors.h"
#include "lel/kvtext.h"

namespace lel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

int default_stride(int length) { return std::max(1, length / 2); }

std::vector<Window> segment_windows(const Trace& trace, int length, int stride) {
  trace.validate();
  if (length < 2) throw ValidationError("segment_windows: L must be >= 2");
  if (stride < 1 || stride > length) throw ValidationError("segment_windows: stride must lie in [1, L]");
  const long n = static_cast<long>(trace.length());
  if (n < length)
    throw ValidationError("segment_windows: trace of " + std::to_string(n) + " samples is shorter than L = " +
                          std::to_string(length));
  const std::size_t c = trace.channels.size();
  std::vector<Window> out;
  for (long origin = 0; origin + length <= n; origin += stride) {
    Window w;
    w.origin = origin;
    w.channels = static_cast<int>(c);
    w.samples.resize(static_cast<std::size_t>(length) * c);
    for (int t = 0; t < length; ++t)
      for (std::size_t ch = 0; ch < c; ++ch) w.samples[t * c + ch] = trace.channels[ch].values[origin + t];
    out.push_back(std::move(w));
  }
  return out;
}

std::pair<Window, Window> augment(const Window& window, double scale_lo, double scale_hi, double noise_frac,
                                  Rng& rng) {
  if (!(scale_lo > 0.0 && scale_lo <= scale_hi)) throw ValidationError("augment: need 0 < lo <= hi");
  if (!(noise_frac >= 0.0)) throw ValidationError("augment: noise_frac must be >= 0");
  const auto& x = window.samples;
  const double n = static_cast<double>(x.size());
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mu) * (v - mu);
  const double noise_sd = noise_frac * std::sqrt(ss / n);

  auto view = [&] {
    Window w = window;
    const double s = scale_lo == scale_hi ? scale_lo : rng.uniform(scale_lo, scale_hi);
    for (double& v : w.samples) {
      v *= s;
      if (noise_sd > 0.0) v += noise_sd * rng.normal();
    }
    return w;
  };
  Window a = view();
  Window b = view();
  return {std::move(a), std::move(b)};
}

Encoder Encoder::zeros(int window_length, int channels, int hidden, int dim) {
  if (window_length < 1 || channels < 1 || hidden < 1 || dim < 1)
    throw ValidationError("encoder: all sizes must be >= 1");
  Encoder e;
  e.window_length = window_length;
  e.channels = channels;
  const int in = window_length * channels;
  e.shift = VectorXd::Zero(in);
  e.scale = VectorXd::Ones(in);
  e.w1 = MatrixXd::Zero(hidden, in);
  e.b1 = VectorXd::Zero(hidden);
  e.w2 = MatrixXd::Zero(dim, hidden);
  e.b2 = VectorXd::Zero(dim);
  return e;
}

namespace {

MatrixXd to_columns(const Encoder& enc, const std::vector<Window>& windows) {
  MatrixXd x(enc.input_size(), static_cast<long>(windows.size()));
  for (std::size_t j = 0; j < windows.size(); ++j) {
    if (static_cast<int>(windows[j].samples.size()) != enc.input_size())
      throw ValidationError("encode: window has " + std::to_string(windows[j].samples.size()) +
                            " values, encoder expects " + std::to_string(enc.input_size()));
    x.col(static_cast<long>(j)) = Eigen::Map<const VectorXd>(windows[j].samples.data(), enc.input_size());
  }
  return x;
}

struct Forward {
  MatrixXd u;  // normalized input, in x N
  MatrixXd a;  // hidden activation, h x N
  MatrixXd z;  // embeddings, d x N
};

Forward forward(const Encoder& enc, const MatrixXd& x) {
  Forward f;
  f.u = (x.colwise() - enc.shift).array().colwise() / enc.scale.array();
  f.a = ((enc.w1 * f.u).colwise() + enc.b1).array().tanh();
  f.z = (enc.w2 * f.a).colwise() + enc.b2;
  return f;
}

// Loss on column embeddings z1, z2 (d x N) with optional gradients w.r.t. them.
double info_nce(const MatrixXd& z1, const MatrixXd& z2, double temperature, MatrixXd* g1, MatrixXd* g2) {
  const long n = z1.cols();
  const VectorXd n1 = z1.colwise().norm();
  const VectorXd n2 = z2.colwise().norm();
  if ((n1.array() == 0.0).any() || (n2.array() == 0.0).any())
    throw ValidationError("contrastive_loss: zero-norm embedding");
  const MatrixXd u1 = z1.array().rowwise() / n1.transpose().array();
  const MatrixXd u2 = z2.array().rowwise() / n2.transpose().array();
  const MatrixXd sim = u1.transpose() * u2;  // N x N
  const MatrixXd logits = sim / temperature;

  double loss = 0.0;
  MatrixXd dsim(n, n);
  for (long i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    const double s = e.sum();
    loss += m + std::log(s) - logits(i, i);
    dsim.row(i) = e / (s * temperature);
    dsim(i, i) -= 1.0 / temperature;
  }
  if (g1 && g2) {
    // d cos(a,b)/da = (b_hat - cos * a_hat) / |a|
    MatrixXd gu1 = u2 * dsim.transpose();  // d x N
    MatrixXd gu2 = u1 * dsim;
    const VectorXd c1 = (dsim.array() * sim.array()).rowwise().sum();
    const VectorXd c2 = (dsim.array() * sim.array()).colwise().sum().transpose();
    *g1 = ((gu1 - u1 * c1.asDiagonal()).array().rowwise() / n1.transpose().array()).matrix();
    *g2 = ((gu2 - u2 * c2.asDiagonal()).array().rowwise() / n2.transpose().array()).matrix();
  }
  return loss;
}

void backward(const Encoder& enc, const Forward& f, const MatrixXd& gz, MatrixXd& gw1, VectorXd& gb1, MatrixXd& gw2,
              VectorXd& gb2) {
  gw2 += gz * f.a.transpose();
  gb2 += gz.rowwise().sum();
  const MatrixXd gpre = (enc.w2.transpose() * gz).array() * (1.0 - f.a.array().square());
  gw1 += gpre * f.u.transpose();
  gb1 += gpre.rowwise().sum();
}

}  // namespace

VectorXd encode(const Encoder& encoder, const Window& window) {
  return forward(encoder, to_columns(encoder, {window})).z.col(0);
}

MatrixXd encode_all(const Encoder& encoder, const std::vector<Window>& windows) {
  return forward(encoder, to_columns(encoder, windows)).z.transpose();
}

double contrastive_loss(const MatrixXd& z1, const MatrixXd& z2, double temperature) {
  if (z1.rows() < 1 || z1.rows() != z2.rows() || z1.cols() != z2.cols())
    throw ValidationError("contrastive_loss: z1 and z2 must both be N x d with N >= 1");
  if (!(temperature > 0.0)) throw ValidationError("contrastive_loss: temperature must be > 0");
  return info_nce(z1.transpose(), z2.transpose(), temperature, nullptr, nullptr);
}

std::vector<double> flatten_weights(const Encoder& e) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(e.w1.size() + e.b1.size() + e.w2.size() + e.b2.size()));
  out.insert(out.end(), e.w1.data(), e.w1.data() + e.w1.size());
  out.insert(out.end(), e.b1.data(), e.b1.data() + e.b1.size());
  out.insert(out.end(), e.w2.data(), e.w2.data() + e.w2.size());
  out.insert(out.end(), e.b2.data(), e.b2.data() + e.b2.size());
  return out;
}

void set_weights(Encoder& e, const std::vector<double>& flat) {
  const long total = e.w1.size() + e.b1.size() + e.w2.size() + e.b2.size();
  if (static_cast<long>(flat.size()) != total) throw ValidationError("set_weights: size mismatch");
  const double* p = flat.data();
  std::copy(p, p + e.w1.size(), e.w1.data());
  p += e.w1.size();
  std::copy(p, p + e.b1.size(), e.b1.data());
  p += e.b1.size();
  std::copy(p, p + e.w2.size(), e.w2.data());
  p += e.w2.size();
  std::copy(p, p + e.b2.size(), e.b2.data());
}

double contrastive_objective(const Encoder& enc, const MatrixXd& x1, const MatrixXd& x2, double temperature,
                             std::vector<double>* grad) {
  if (x1.rows() != enc.input_size() || x2.rows() != enc.input_size() || x1.cols() != x2.cols() || x1.cols() < 1)
    throw ValidationError("contrastive_objective: view batches must be input_size x N");
  const Forward f1 = forward(enc, x1);
  const Forward f2 = forward(enc, x2);
  if (!grad) return info_nce(f1.z, f2.z, temperature, nullptr, nullptr);

  MatrixXd gz1, gz2;
  const double loss = info_nce(f1.z, f2.z, temperature, &gz1, &gz2);
  MatrixXd gw1 = MatrixXd::Zero(enc.w1.rows(), enc.w1.cols());
  VectorXd gb1 = VectorXd::Zero(enc.b1.size());
  MatrixXd gw2 = MatrixXd::Zero(enc.w2.rows(), enc.w2.cols());
  VectorXd gb2 = VectorXd::Zero(enc.b2.size());
  backward(enc, f1, gz1, gw1, gb1, gw2, gb2);
  backward(enc, f2, gz2, gw1, gb1, gw2, gb2);
  Encoder g = enc;
  g.w1 = gw1;
  g.b1 = gb1;
  g.w2 = gw2;
  g.b2 = gb2;
  *grad = flatten_weights(g);
  return loss;
}

void TclConfig::validate() const {
  if (dim < 1 || hidden < 1) throw ValidationError("tcl: dim and hidden must be >= 1");
  if (!(temperature > 0.0)) throw ValidationError("tcl: temperature must be > 0");
  if (epochs < 0) throw ValidationError("tcl: epochs must be >= 0");
  if (batch < 2) throw ValidationError("tcl: batch must be >= 2");
  if (!(step_size > 0.0)) throw ValidationError("tcl: step_size must be > 0");
  if (!(scale_lo > 0.0 && scale_lo <= scale_hi)) throw ValidationError("tcl: need 0 < scale_lo <= scale_hi");
  if (!(noise_frac >= 0.0)) throw ValidationError("tcl: noise_frac must be >= 0");
}

Encoder train_encoder(const std::vector<Window>& windows, const TclConfig& cfg, std::uint64_t seed,
                      std::vector<double>* epoch_loss) {
  cfg.validate();
  if (windows.size() < 2) throw ValidationError("train_encoder: need at least 2 windows for negatives");
  const int in = static_cast<int>(windows.front().samples.size());
  for (const Window& w : windows)
    if (static_cast<int>(w.samples.size()) != in || w.channels != windows.front().channels) throw ValidationError("train_encoder: ragged windows");
  const int channels = windows.front().channels;
  Encoder enc = Encoder::zeros(in / channels, channels, cfg.hidden, cfg.dim);

  // Input standardization from the pooled training values.
  double sum = 0.0, sq = 0.0, count = 0.0;
  for (const Window& w : windows)
    for (double v : w.samples) {
      sum += v;
      sq += v * v;
      count += 1.0;
    }
  const double mu = sum / count;
  const double sd = std::sqrt(std::max(0.0, sq / count - mu * mu));
  enc.shift.setConstant(mu);
  enc.scale.setConstant(sd > 0.0 ? sd : 1.0);

  Rng rng(seed);
  const double lim1 = std::sqrt(6.0 / (in + cfg.hidden));
  const double lim2 = std::sqrt(6.0 / (cfg.hidden + cfg.dim));
  for (long i = 0; i < enc.w1.size(); ++i) enc.w1.data()[i] = rng.uniform(-lim1, lim1);
  for (long i = 0; i < enc.w2.size(); ++i) enc.w2.data()[i] = rng.uniform(-lim2, lim2);

  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), windows.size());

  auto batch_views = [&](std::size_t begin, std::size_t end, MatrixXd& x1, MatrixXd& x2, Rng& rng) {
    x1.resize(in, static_cast<long>(end - begin));
    x2.resize(in, static_cast<long>(end - begin));
    for (std::size_t j = begin; j < end; ++j) {
      auto [a, b] = augment(windows[order[j]], cfg.scale_lo, cfg.scale_hi, cfg.noise_frac, rng);
      x1.col(static_cast<long>(j - begin)) = Eigen::Map<const VectorXd>(a.samples.data(), in);
      x2.col(static_cast<long>(j - begin)) = Eigen::Map<const VectorXd>(b.samples.data(), in);
    }
  };
  // Batches of fewer than two windows have no negatives; the tail joins the previous batch.
  auto batch_end = [&](std::size_t begin) {
    const std::size_t end = std::min(begin + batch, windows.size());
    return windows.size() - end < 2 ? windows.size() : end;
  };

  // Fixed probe views, drawn from a separate stream so that asking for the
  // history does not change the weights.
  std::vector<std::pair<MatrixXd, MatrixXd>> probe;
  auto probe_loss = [&] {
    double total = 0.0;
    for (const auto& [x1, x2] : probe) total += contrastive_objective(enc, x1, x2, cfg.temperature, nullptr);
    return total / static_cast<double>(windows.size());
  };
  if (epoch_loss) {
    Rng probe_rng(Rng::derive(seed, 1));
    for (std::size_t b = 0; b < windows.size();) {
      const std::size_t e = batch_end(b);
      MatrixXd x1, x2;
      batch_views(b, e, x1, x2, probe_rng);
      probe.emplace_back(std::move(x1), std::move(x2));
      b = e;
    }
    epoch_loss->assign(1, probe_loss());
  }

  std::vector<double> w = flatten_weights(enc);
  std::vector<double> grad;
  MatrixXd x1, x2;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.next() % (i + 1));
      std::swap(order[i], order[j]);
    }
    for (std::size_t b = 0; b < windows.size();) {
      const std::size_t e = batch_end(b);
      batch_views(b, e, x1, x2, rng);
      contrastive_objective(enc, x1, x2, cfg.temperature, &grad);
      const double step = cfg.step_size / static_cast<double>(e - b);
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= step * grad[k];
      set_weights(enc, w);
      b = e;
    }
    if (epoch_loss) epoch_loss->push_back(probe_loss());
  }
  return enc;
}

VectorXd PatternVector::flat() const {
  VectorXd out(mean.size() + var.size());
  out << mean, var;
  return out;
}

double PatternVector::squared_distance(const PatternVector& other) const {
  if (mean.size() != other.mean.size()) throw ValidationError("pattern vectors differ in dimension");
  return (flat() - other.flat()).squaredNorm();
}

PatternVector pattern_vector(const MatrixXd& z) {
  if (z.rows() < 1) throw ValidationError("pattern_vector: no embeddings");
  PatternVector p;
  p.mean = z.colwise().mean().transpose();
  p.var = (z.rowwise() - p.mean.transpose()).array().square().colwise().mean().transpose();
  return p;
}

PatternVector series_pattern(const Encoder& encoder, const std::vector<double>& series, int stride) {
  const Trace t = Trace::single("x", series, 1.0);
  return pattern_vector(encode_all(encoder, segment_windows(t, encoder.window_length, stride)));
}

namespace {

constexpr const char* kEncoderHeader = "lel-encoder/1";

void write_row(std::ostringstream& os, const double* p, long n) {
  for (long i = 0; i < n; ++i) os << (i ? " " : "") << format_double(p[i]);
  os << '\n';
}

}  // namespace

std::string serialize_encoder(const Encoder& e) {
  std::ostringstream os;
  os << kEncoderHeader << ' ' << e.window_length << ' ' << e.channels << ' ' << e.hidden() << ' ' << e.dim()
     << " tanh\n";
  write_row(os, e.shift.data(), e.shift.size());
  write_row(os, e.scale.data(), e.scale.size());
  for (long r = 0; r < e.w1.rows(); ++r) {
    const VectorXd row = e.w1.row(r);
    write_row(os, row.data(), row.size());
  }
  write_row(os, e.b1.data(), e.b1.size());
  for (long r = 0; r < e.w2.rows(); ++r) {
    const VectorXd row = e.w2.row(r);
    write_row(os, row.data(), row.size());
  }
  write_row(os, e.b2.data(), e.b2.size());
  return os.str();
}

Encoder parse_encoder(const std::string& text) {
  std::istringstream is(text);
  std::string tag, act;
  int l = 0, c = 0, h = 0, d = 0;
  if (!(is >> tag >> l >> c >> h >> d >> act) || tag != kEncoderHeader)
    throw ParseError("encoder: missing or unsupported header");
  if (act != "tanh") throw ParseError("encoder: unsupported activation '" + act + "'");
  Encoder e = Encoder::zeros(l, c, h, d);
  auto read = [&](double* p, long n, const char* what) {
    for (long i = 0; i < n; ++i) {
      std::string tok;
      if (!(is >> tok)) throw ParseError(std::string("encoder: truncated ") + what);
      try {
        p[i] = std::stod(tok);
      } catch (const std::exception&) {
        throw ParseError(std::string("encoder: bad number in ") + what + ": '" + tok + "'");
      }
    }
  };
  read(e.shift.data(), e.shift.size(), "shift");
  read(e.scale.data(), e.scale.size(), "scale");
  for (long r = 0; r < e.w1.rows(); ++r) {
    VectorXd row(e.w1.cols());
    read(row.data(), row.size(), "w1");
    e.w1.row(r) = row;
  }
  read(e.b1.data(), e.b1.size(), "b1");
  for (long r = 0; r < e.w2.rows(); ++r) {
    VectorXd row(e.w2.cols());
    read(row.data(), row.size(), "w2");
    e.w2.row(r) = row;
  }
  read(e.b2.data(), e.b2.size(), "b2");
  std::string extra;
  if (is >> extra) throw ParseError("encoder: trailing data");
  return e;
}

}  // namespace lel
