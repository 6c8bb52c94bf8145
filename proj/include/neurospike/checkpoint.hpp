#pragma once

#include <map>
#include <string>
#include <vector>

#include "neurospike/tensor.hpp"

namespace neurospike {

// Checkpoint directory: one NTSR per tensor plus index.json mapping layer
// names to files/shapes and carrying free-form metadata (e.g. LIF beta,
// theta, slope, steps).
void save_checkpoint(const std::string& dir,
                     const std::vector<std::pair<std::string, const Tensor<float>*>>& tensors,
                     const std::map<std::string, double>& metadata = {});

struct Checkpoint {
  std::map<std::string, Tensor<float>> tensors;
  std::map<std::string, double> metadata;
};

Checkpoint load_checkpoint(const std::string& dir);

template <class T>
struct CsnnModel;

// CSNN round trip: weights as NTSR tensors, architecture and LIF parameters
// (beta, theta, k, steps) in the index metadata.
void save_csnn_checkpoint(const std::string& dir, CsnnModel<float>& model);
CsnnModel<float> load_csnn_checkpoint(const std::string& dir);

}  // namespace neurospike
