#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ewcdr/errors.hpp"
#include "ewcdr/tensor.hpp"

namespace ewcdr {

struct Sample {
    Tensor1 features;
    std::size_t label = 0;
};

struct LabeledDataset {
    std::vector<Sample> samples;
    std::size_t feature_dim = 0;
    std::size_t num_classes = 0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    void validate() const {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (samples[i].features.size() != feature_dim)
                throw validation_error("dataset: sample " + std::to_string(i) +
                                       " has feature length " +
                                       std::to_string(samples[i].features.size()) +
                                       ", expected " + std::to_string(feature_dim));
            if (samples[i].label >= num_classes)
                throw validation_error("dataset: sample " + std::to_string(i) + " has label " +
                                       std::to_string(samples[i].label) + ", only " +
                                       std::to_string(num_classes) + " classes declared");
        }
    }
};

}  // namespace ewcdr
