#pragma once

#include <vector>

namespace wta {

// Observation grid fed to the solvers' instance builder and the policy
// network: m_max x n_max x 3 with channels (feasibility, normalized time to
// go, normalized observed value). Entries outside the live engagement, rows
// of dead weapons, columns of destroyed targets, and infeasible pairs are -1
// in all three channels. Stored as channel planes, row major within a plane.
class EngagementTensor {
 public:
  static constexpr int kChannels = 3;

  EngagementTensor() = default;
  EngagementTensor(int m_max, int n_max)
      : m_max_(m_max), n_max_(n_max), data_(static_cast<std::size_t>(kChannels) * m_max * n_max, -1.0) {}

  int m_max() const { return m_max_; }
  int n_max() const { return n_max_; }

  double& at(int i, int j, int c) { return data_[(static_cast<std::size_t>(c) * m_max_ + i) * n_max_ + j]; }
  double at(int i, int j, int c) const {
    return data_[(static_cast<std::size_t>(c) * m_max_ + i) * n_max_ + j];
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  int m_max_ = 0;
  int n_max_ = 0;
  std::vector<double> data_;
};

struct TensorNorms {
  double t_go = 20.0;  // seconds mapped onto [0, 1]
  double value = 15.0; // global value upper bound
};

}  // namespace wta
