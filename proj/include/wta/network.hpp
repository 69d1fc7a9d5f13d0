#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wta/errors.hpp"
#include "wta/rng.hpp"
#include "wta/solvers.hpp"
#include "wta/tensor.hpp"

namespace wta {

using Matrix = Eigen::MatrixXd;

// Architecture bookkeeping. Two parallel stacks (policy and value) share the
// shape: 3-channel input -> 8 filters 3x3 pad 1 stride 1 -> 8 filters 3x3
// pad 1 stride 2 -> flatten -> tanh fc1 -> tanh fc2 -> linear head. No
// pooling. fc1 width is the geometric mean of the flattened conv size and the
// head width, rounded.
struct NetDims {
  int m_max = 0;
  int n_max = 0;
  int h2 = 0;
  int w2 = 0;
  int z = 0;
  int act_dim = 0;
  int pol_h1 = 0;
  int pol_h2 = 0;
  int val_h1 = 0;
  int val_h2 = 5;

  static NetDims make(int m_max, int n_max) {
    NetDims d;
    d.m_max = m_max;
    d.n_max = n_max;
    d.h2 = (m_max + 1) / 2;
    d.w2 = (n_max + 1) / 2;
    d.z = 8 * d.h2 * d.w2;
    d.act_dim = m_max * n_max;
    d.pol_h1 = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d.z) * d.act_dim)));
    d.pol_h2 = 10 * d.act_dim;
    d.val_h1 = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d.z) * 1.0)));
    return d;
  }
};

inline constexpr int kConvFilters = 8;
inline constexpr int kKernel = 3;

struct ConvLayer {
  Matrix w;  // filters x (in_channels * 9)
  Matrix b;  // filters x 1
};

struct FcLayer {
  Matrix w;  // out x in
  Matrix b;  // out x 1
};

struct NetworkStack {
  ConvLayer conv1, conv2;
  FcLayer fc1, fc2, fc3;
};

struct NamedTensor {
  std::string name;
  Matrix* tensor;
};

struct NetworkParams {
  int m_max = 0;
  int n_max = 0;
  NetworkStack policy;
  NetworkStack value;

  NetDims dims() const { return NetDims::make(m_max, n_max); }

  // The layer registry drives initialization, Adam state, and persistence;
  // order is part of the weight-file contract.
  std::vector<NamedTensor> tensors() {
    std::vector<NamedTensor> out;
    auto add = [&out](const std::string& prefix, NetworkStack& s) {
      out.push_back({prefix + ".conv1.w", &s.conv1.w});
      out.push_back({prefix + ".conv1.b", &s.conv1.b});
      out.push_back({prefix + ".conv2.w", &s.conv2.w});
      out.push_back({prefix + ".conv2.b", &s.conv2.b});
      out.push_back({prefix + ".fc1.w", &s.fc1.w});
      out.push_back({prefix + ".fc1.b", &s.fc1.b});
      out.push_back({prefix + ".fc2.w", &s.fc2.w});
      out.push_back({prefix + ".fc2.b", &s.fc2.b});
      out.push_back({prefix + ".fc3.w", &s.fc3.w});
      out.push_back({prefix + ".fc3.b", &s.fc3.b});
    };
    add("policy", policy);
    add("value", value);
    return out;
  }

  std::vector<NamedTensor> tensors() const {
    return const_cast<NetworkParams*>(this)->tensors();
  }
};

namespace netdetail {

inline void init_matrix(Matrix& m, int rows, int cols, int fan_in, double scale,
                        SplitMix64& rng) {
  m.resize(rows, cols);
  const double bound = std::sqrt(3.0 / static_cast<double>(fan_in)) * scale;
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
}

}  // namespace netdetail

// Fan-in scaled uniform initialization; the policy head is scaled down so the
// starting distribution is near uniform.
inline NetworkParams init_network(int m_max, int n_max, std::uint64_t seed) {
  NetworkParams p;
  p.m_max = m_max;
  p.n_max = n_max;
  const NetDims d = NetDims::make(m_max, n_max);
  SplitMix64 rng(mix64(seed, 0x6e657477ull));  // network stream

  auto build = [&](NetworkStack& s, int h1, int h2, int out, bool head_small) {
    netdetail::init_matrix(s.conv1.w, kConvFilters, 3 * kKernel * kKernel, 3 * 9, 1.0, rng);
    s.conv1.b = Matrix::Zero(kConvFilters, 1);
    netdetail::init_matrix(s.conv2.w, kConvFilters, kConvFilters * kKernel * kKernel,
                           kConvFilters * 9, 1.0, rng);
    s.conv2.b = Matrix::Zero(kConvFilters, 1);
    netdetail::init_matrix(s.fc1.w, h1, d.z, d.z, 1.0, rng);
    s.fc1.b = Matrix::Zero(h1, 1);
    netdetail::init_matrix(s.fc2.w, h2, h1, h1, 1.0, rng);
    s.fc2.b = Matrix::Zero(h2, 1);
    netdetail::init_matrix(s.fc3.w, out, h2, h2, head_small ? 0.01 : 1.0, rng);
    s.fc3.b = Matrix::Zero(out, 1);
  };
  build(p.policy, d.pol_h1, d.pol_h2, d.act_dim, true);
  build(p.value, d.val_h1, d.val_h2, 1, false);
  return p;
}

namespace netdetail {

// Patch-gather (im2col) for a batch of channel-plane images. Output rows are
// (sample, out_row, out_col) in that order; columns are (channel, ki, kj).
inline Matrix im2col(const Matrix& input, int batch, int channels, int h, int w, int stride,
                     int h_out, int w_out) {
  Matrix cols(static_cast<Eigen::Index>(batch) * h_out * w_out,
              static_cast<Eigen::Index>(channels) * kKernel * kKernel);
  cols.setZero();
  for (int s = 0; s < batch; ++s) {
    for (int oi = 0; oi < h_out; ++oi) {
      for (int oj = 0; oj < w_out; ++oj) {
        const Eigen::Index row =
            (static_cast<Eigen::Index>(s) * h_out + oi) * w_out + oj;
        for (int c = 0; c < channels; ++c) {
          for (int ki = 0; ki < kKernel; ++ki) {
            const int ii = oi * stride - 1 + ki;
            if (ii < 0 || ii >= h) continue;
            for (int kj = 0; kj < kKernel; ++kj) {
              const int jj = oj * stride - 1 + kj;
              if (jj < 0 || jj >= w) continue;
              cols(row, (c * kKernel + ki) * kKernel + kj) =
                  input(s, (static_cast<Eigen::Index>(c) * h + ii) * w + jj);
            }
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-add patch gradients back onto the image grid.
inline Matrix col2im(const Matrix& dcols, int batch, int channels, int h, int w, int stride,
                     int h_out, int w_out) {
  Matrix dinput = Matrix::Zero(batch, static_cast<Eigen::Index>(channels) * h * w);
  for (int s = 0; s < batch; ++s) {
    for (int oi = 0; oi < h_out; ++oi) {
      for (int oj = 0; oj < w_out; ++oj) {
        const Eigen::Index row =
            (static_cast<Eigen::Index>(s) * h_out + oi) * w_out + oj;
        for (int c = 0; c < channels; ++c) {
          for (int ki = 0; ki < kKernel; ++ki) {
            const int ii = oi * stride - 1 + ki;
            if (ii < 0 || ii >= h) continue;
            for (int kj = 0; kj < kKernel; ++kj) {
              const int jj = oj * stride - 1 + kj;
              if (jj < 0 || jj >= w) continue;
              dinput(s, (static_cast<Eigen::Index>(c) * h + ii) * w + jj) +=
                  dcols(row, (c * kKernel + ki) * kKernel + kj);
            }
          }
        }
      }
    }
  }
  return dinput;
}

// Reorders conv output from (batch*positions x filters) to channel-major flat
// rows (batch x filters*positions).
inline Matrix flatten_channel_major(const Matrix& out, int batch, int positions) {
  Matrix flat(batch, static_cast<Eigen::Index>(kConvFilters) * positions);
  for (int s = 0; s < batch; ++s)
    for (int f = 0; f < kConvFilters; ++f)
      for (int p = 0; p < positions; ++p)
        flat(s, static_cast<Eigen::Index>(f) * positions + p) =
            out(static_cast<Eigen::Index>(s) * positions + p, f);
  return flat;
}

inline Matrix unflatten_channel_major(const Matrix& dflat, int batch, int positions) {
  Matrix dout(static_cast<Eigen::Index>(batch) * positions, kConvFilters);
  for (int s = 0; s < batch; ++s)
    for (int f = 0; f < kConvFilters; ++f)
      for (int p = 0; p < positions; ++p)
        dout(static_cast<Eigen::Index>(s) * positions + p, f) =
            dflat(s, static_cast<Eigen::Index>(f) * positions + p);
  return dout;
}

}  // namespace netdetail

// Forward activations kept for the backward pass.
struct StackCache {
  int batch = 0;
  Matrix input;       // batch x (3*h*w)
  Matrix cols1;       // im2col of input
  Matrix conv1_out;   // (batch*h*w) x filters, post ReLU
  Matrix cols2;       // im2col of conv1 output planes
  Matrix conv2_out;   // (batch*h2*w2) x filters, post ReLU
  Matrix flat;        // batch x z
  Matrix h1;          // batch x h1, post tanh
  Matrix h2;          // batch x h2, post tanh
  Matrix out;         // batch x out_dim
};

// Batched forward through one stack. Rows of `input` are flattened
// channel-plane observations.
inline void stack_forward(const NetworkStack& s, const Matrix& input, int m_max, int n_max,
                          StackCache& cache) {
  using namespace netdetail;
  const NetDims d = NetDims::make(m_max, n_max);
  const int batch = static_cast<int>(input.rows());
  cache.batch = batch;
  cache.input = input;

  cache.cols1 = im2col(input, batch, 3, m_max, n_max, 1, m_max, n_max);
  cache.conv1_out = cache.cols1 * s.conv1.w.transpose();
  cache.conv1_out.rowwise() += s.conv1.b.col(0).transpose();
  cache.conv1_out = cache.conv1_out.cwiseMax(0.0);

  const Matrix planes1 = flatten_channel_major(cache.conv1_out, batch, m_max * n_max);
  cache.cols2 = im2col(planes1, batch, kConvFilters, m_max, n_max, 2, d.h2, d.w2);
  cache.conv2_out = cache.cols2 * s.conv2.w.transpose();
  cache.conv2_out.rowwise() += s.conv2.b.col(0).transpose();
  cache.conv2_out = cache.conv2_out.cwiseMax(0.0);

  cache.flat = flatten_channel_major(cache.conv2_out, batch, d.h2 * d.w2);
  cache.h1 = (cache.flat * s.fc1.w.transpose()).rowwise() + s.fc1.b.col(0).transpose();
  cache.h1 = cache.h1.array().tanh();
  cache.h2 = (cache.h1 * s.fc2.w.transpose()).rowwise() + s.fc2.b.col(0).transpose();
  cache.h2 = cache.h2.array().tanh();
  cache.out = (cache.h2 * s.fc3.w.transpose()).rowwise() + s.fc3.b.col(0).transpose();
}

struct StackGrads {
  ConvLayer conv1, conv2;
  FcLayer fc1, fc2, fc3;

  void resize_like(const NetworkStack& s) {
    conv1.w = Matrix::Zero(s.conv1.w.rows(), s.conv1.w.cols());
    conv1.b = Matrix::Zero(s.conv1.b.rows(), 1);
    conv2.w = Matrix::Zero(s.conv2.w.rows(), s.conv2.w.cols());
    conv2.b = Matrix::Zero(s.conv2.b.rows(), 1);
    fc1.w = Matrix::Zero(s.fc1.w.rows(), s.fc1.w.cols());
    fc1.b = Matrix::Zero(s.fc1.b.rows(), 1);
    fc2.w = Matrix::Zero(s.fc2.w.rows(), s.fc2.w.cols());
    fc2.b = Matrix::Zero(s.fc2.b.rows(), 1);
    fc3.w = Matrix::Zero(s.fc3.w.rows(), s.fc3.w.cols());
    fc3.b = Matrix::Zero(s.fc3.b.rows(), 1);
  }
};

// Reverse accumulation through one stack given d(loss)/d(out).
inline StackGrads stack_backward(const NetworkStack& s, const StackCache& cache,
                                 const Matrix& dout, int m_max, int n_max) {
  using namespace netdetail;
  const NetDims d = NetDims::make(m_max, n_max);
  const int batch = cache.batch;
  StackGrads g;

  g.fc3.w = dout.transpose() * cache.h2;
  g.fc3.b = dout.colwise().sum().transpose();
  Matrix dh2 = dout * s.fc3.w;
  dh2.array() *= (1.0 - cache.h2.array().square());

  g.fc2.w = dh2.transpose() * cache.h1;
  g.fc2.b = dh2.colwise().sum().transpose();
  Matrix dh1 = dh2 * s.fc2.w;
  dh1.array() *= (1.0 - cache.h1.array().square());

  g.fc1.w = dh1.transpose() * cache.flat;
  g.fc1.b = dh1.colwise().sum().transpose();
  const Matrix dflat = dh1 * s.fc1.w;

  Matrix dconv2 = unflatten_channel_major(dflat, batch, d.h2 * d.w2);
  dconv2.array() *= (cache.conv2_out.array() > 0.0).cast<double>();
  g.conv2.w = dconv2.transpose() * cache.cols2;
  g.conv2.b = dconv2.colwise().sum().transpose();
  const Matrix dcols2 = dconv2 * s.conv2.w;
  const Matrix dplanes1 = col2im(dcols2, batch, kConvFilters, m_max, n_max, 2, d.h2, d.w2);

  Matrix dconv1 = unflatten_channel_major(dplanes1, batch, m_max * n_max);
  dconv1.array() *= (cache.conv1_out.array() > 0.0).cast<double>();
  g.conv1.w = dconv1.transpose() * cache.cols1;
  g.conv1.b = dconv1.colwise().sum().transpose();
  return g;
}

// --- action distribution ------------------------------------------------------

// Per-weapon categorical distributions over targets, parameterized by a logit
// grid. Softmax rows are stabilized by max-logit subtraction.
struct ActionDistribution {
  int m_max = 0;
  int n_max = 0;
  Matrix logits;  // m_max x n_max
  Matrix probs;   // row-stochastic
};

inline ActionDistribution make_distribution(const Matrix& logits) {
  ActionDistribution d;
  d.m_max = static_cast<int>(logits.rows());
  d.n_max = static_cast<int>(logits.cols());
  d.logits = logits;
  d.probs.resize(d.m_max, d.n_max);
  for (int i = 0; i < d.m_max; ++i) {
    const double mx = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
    d.probs.row(i) = e / e.sum();
  }
  return d;
}

inline Matrix tensor_to_row(const EngagementTensor& e) {
  return Eigen::Map<const Eigen::RowVectorXd>(e.data().data(),
                                              static_cast<Eigen::Index>(e.data().size()));
}

inline ActionDistribution policy_forward(const NetworkParams& p, const EngagementTensor& e) {
  if (e.m_max() != p.m_max || e.n_max() != p.n_max)
    throw WeightsError("tensor shape does not match network");
  StackCache cache;
  stack_forward(p.policy, tensor_to_row(e), p.m_max, p.n_max, cache);
  Matrix logits(p.m_max, p.n_max);
  for (int i = 0; i < p.m_max; ++i)
    for (int j = 0; j < p.n_max; ++j) logits(i, j) = cache.out(0, i * p.n_max + j);
  return make_distribution(logits);
}

inline double value_forward(const NetworkParams& p, const EngagementTensor& e) {
  if (e.m_max() != p.m_max || e.n_max() != p.n_max)
    throw WeightsError("tensor shape does not match network");
  StackCache cache;
  stack_forward(p.value, tensor_to_row(e), p.m_max, p.n_max, cache);
  return cache.out(0, 0);
}

// Samples the first m rows independently. Entries beyond the episode's live
// target count are legal here; the environment clamps them.
inline Assignment sample_action(const ActionDistribution& d, int m, SplitMix64& rng) {
  Assignment a(m, 0);
  for (int i = 0; i < m; ++i) {
    const double u = rng.u01();
    double acc = 0.0;
    int pick = d.n_max - 1;
    for (int j = 0; j < d.n_max; ++j) {
      acc += d.probs(i, j);
      if (u < acc) {
        pick = j;
        break;
      }
    }
    a[i] = pick;
  }
  return a;
}

inline Assignment greedy_action(const ActionDistribution& d, int m) {
  Assignment a(m, 0);
  for (int i = 0; i < m; ++i) {
    double best = d.logits(i, 0);
    a[i] = 0;
    for (int j = 1; j < d.n_max; ++j)
      if (d.logits(i, j) > best) {
        best = d.logits(i, j);
        a[i] = j;
      }
  }
  return a;
}

// Log probability of the first m rows of the assignment plus the summed row
// entropies, both from stabilized logits.
inline std::pair<double, double> log_prob_and_entropy(const ActionDistribution& d,
                                                      const Assignment& a, int m) {
  double lp = 0.0;
  double ent = 0.0;
  for (int i = 0; i < m; ++i) {
    const double mx = d.logits.row(i).maxCoeff();
    const Eigen::RowVectorXd shifted = d.logits.row(i).array() - mx;
    const double lse = std::log(shifted.array().exp().sum());
    lp += shifted(a[i]) - lse;
    // H = lse - sum p * shifted
    ent += lse - (d.probs.row(i).array() * shifted.array()).sum();
  }
  return {lp, ent};
}

// --- persistence ---------------------------------------------------------------

inline constexpr int kWeightsFormatVersion = 1;

inline void save_params(const NetworkParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw WeightsError("cannot open '" + path + "' for writing");
  out.precision(17);
  const auto tensors = p.tensors();
  out << "wta-weights " << kWeightsFormatVersion << "\n";
  out << "m_max " << p.m_max << "\n";
  out << "n_max " << p.n_max << "\n";
  out << "tensors " << tensors.size() << "\n";
  for (const auto& t : tensors) {
    out << "tensor " << t.name << ' ' << t.tensor->rows() << ' ' << t.tensor->cols() << "\n";
    for (Eigen::Index r = 0; r < t.tensor->rows(); ++r) {
      for (Eigen::Index c = 0; c < t.tensor->cols(); ++c) {
        if (c) out << ' ';
        out << (*t.tensor)(r, c);
      }
      out << "\n";
    }
  }
  if (!out) throw WeightsError("write failed for '" + path + "'");
}

inline NetworkParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WeightsError("cannot open weights file '" + path + "'");
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "wta-weights")
    throw WeightsError("'" + path + "' is not a weights manifest");
  if (version != kWeightsFormatVersion)
    throw WeightsError("weights format version " + std::to_string(version) +
                       " unsupported (expected " + std::to_string(kWeightsFormatVersion) + ")");
  int m_max = 0, n_max = 0;
  std::size_t count = 0;
  if (!(in >> tag >> m_max) || tag != "m_max") throw WeightsError("missing m_max");
  if (!(in >> tag >> n_max) || tag != "n_max") throw WeightsError("missing n_max");
  if (!(in >> tag >> count) || tag != "tensors") throw WeightsError("missing tensor count");

  NetworkParams p = init_network(m_max, n_max, 0);
  auto tensors = p.tensors();
  if (count != tensors.size())
    throw WeightsError("manifest lists " + std::to_string(count) + " tensors, architecture has " +
                       std::to_string(tensors.size()));
  for (auto& t : tensors) {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> tag >> name >> rows >> cols) || tag != "tensor")
      throw WeightsError("malformed tensor header");
    if (name != t.name) throw WeightsError("expected tensor '" + t.name + "', found '" + name + "'");
    if (rows != t.tensor->rows() || cols != t.tensor->cols())
      throw WeightsError("shape mismatch for '" + name + "': file " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", architecture " +
                         std::to_string(t.tensor->rows()) + "x" +
                         std::to_string(t.tensor->cols()));
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!(in >> (*t.tensor)(r, c))) throw WeightsError("truncated tensor '" + name + "'");
  }
  return p;
}

// Loads weights and checks them against an expected engagement size.
inline NetworkParams load_params(const std::string& path, int m_max, int n_max) {
  NetworkParams p = load_params(path);
  if (p.m_max != m_max || p.n_max != n_max)
    throw WeightsError("weights '" + path + "' are for (" + std::to_string(p.m_max) + ", " +
                       std::to_string(p.n_max) + "), expected (" + std::to_string(m_max) + ", " +
                       std::to_string(n_max) + ")");
  return p;
}

}  // namespace wta
