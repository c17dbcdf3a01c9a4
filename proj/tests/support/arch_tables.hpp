#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fxda/nn/layers.hpp"

// Expected layer-by-layer shape tables, kept as an independent record of the
// printed architectures. Each row is (label, unbatched output shape).

namespace tables {

using fxda::Shape;
using fxda::Trace;

inline Trace digits_extractor() {
    return {
        {"Conv 5 x 5 x 64, pad 2, ReLU", {32, 32, 64}},
        {"Max-pool, 2 x 2", {16, 16, 64}},
        {"Conv 5 x 5 x 128, ReLU", {12, 12, 128}},
        {"Max-pool, 2 x 2", {6, 6, 128}},
        {"Conv 5 x 5 x 256, ReLU", {2, 2, 256}},
        {"Max-pool, 2 x 2", {1, 1, 256}},
        {"Fully connected, 256 units", {256}},
    };
}

inline Trace digits_generator() {
    return {
        {"input", {256}},
        {"Unpool, 2 x 2", {2, 2, 256}},
        {"Deconv 5 x 5 x 512, ReLU", {6, 6, 512}},
        {"Unpool, 2 x 2", {12, 12, 512}},
        {"Deconv 5 x 5 x 256, ReLU", {16, 16, 256}},
        {"Unpool, 2 x 2", {32, 32, 256}},
        {"Deconv 5 x 5 x 128, pad 2, ReLU", {32, 32, 128}},
        {"Deconv 5 x 5 x 1, pad 2, Sigmoid", {32, 32, 1}},
    };
}

inline Trace digits_sm_generator() {
    Trace t = digits_generator();
    t.insert(t.begin() + 1, {"Fully connected, 256 units, ReLU", {256}});
    return t;
}

inline Trace digits_feature_discriminator() {
    return {
        {"Fully connected, 128 units, ReLU", {128}},
        {"Fully connected, 128 units, ReLU", {128}},
        {"Fully connected, 11 units", {11}},
    };
}

inline Trace digits_image_discriminator() {
    return {
        {"Conv 5 x 5 x 64, pad 2, ReLU", {32, 32, 64}},
        {"Max-pool, 2 x 2", {16, 16, 64}},
        {"Conv 5 x 5 x 128, ReLU", {12, 12, 128}},
        {"Max-pool, 2 x 2", {6, 6, 128}},
        {"Conv 5 x 5 x 256, ReLU", {2, 2, 256}},
        {"Max-pool, 2 x 2", {1, 1, 256}},
        {"Fully connected, 128 units, ReLU", {128}},
        {"Fully connected, 11 units", {11}},
    };
}

inline Trace digits_classifier() {
    return {
        {"Fully connected, 128 units, ReLU", {128}},
        {"Fully connected, 128 units, ReLU", {128}},
        {"Fully connected, 10 units", {10}},
    };
}

inline Trace signs_extractor() {
    return {
        {"Conv 5 x 5 x 128, batch norm, ELU", {36, 36, 128}},
        {"Max-pool, 2 x 2", {18, 18, 128}},
        {"Conv 3 x 3 x 256, batch norm, ELU", {16, 16, 256}},
        {"Max-pool, 2 x 2", {8, 8, 256}},
        {"Conv 5 x 5 x 512, batch norm, ELU", {4, 4, 512}},
        {"Max-pool, 2 x 2", {2, 2, 512}},
    };
}

inline Trace signs_generator() {
    return {
        {"input", {2, 2, 512}},
        {"Unpool, 2 x 2", {4, 4, 512}},
        {"Deconv 5 x 5 x 128, batch norm, ELU", {8, 8, 128}},
        {"Unpool, 2 x 2", {16, 16, 128}},
        {"Deconv 5 x 5 x 32, batch norm, ELU", {20, 20, 32}},
        {"Unpool, 2 x 2", {40, 40, 32}},
        {"Deconv 3 x 3 x 16, pad 1, batch norm, ELU", {40, 40, 16}},
        {"Deconv 3 x 3 x 3, pad 1, Sigmoid", {40, 40, 3}},
    };
}

inline Trace signs_feature_discriminator() {
    return {
        {"Fully connected, 512 units, batch norm, ELU", {512}},
        {"Fully connected, 256 units, batch norm, ELU", {256}},
        {"Fully connected, 44 units", {44}},
    };
}

inline Trace signs_image_discriminator() {
    Trace t = signs_extractor();
    t.push_back({"Fully connected, 512 units, batch norm, ELU", {512}});
    t.push_back({"Fully connected, 256 units, batch norm, ELU", {256}});
    t.push_back({"Fully connected, 44 units", {44}});
    return t;
}

inline Trace signs_classifier() {
    return {
        {"Fully connected, 512 units, batch norm, ELU", {512}},
        {"Fully connected, 256 units, batch norm, ELU", {256}},
        {"Fully connected, 43 units", {43}},
    };
}

inline Trace toy_extractor() {
    return {
        {"Conv 3 x 3 x 8, pad 1, ReLU", {16, 16, 8}},
        {"Max-pool, 2 x 2", {8, 8, 8}},
        {"Conv 3 x 3 x 16, pad 1, ReLU", {8, 8, 16}},
        {"Max-pool, 2 x 2", {4, 4, 16}},
        {"Fully connected, 48 units", {48}},
    };
}

inline Trace toy_generator() {
    return {
        {"input", {48}},
        {"Fully connected, 64 units, ReLU", {64}},
        {"Unpool, 2 x 2", {4, 4, 16}},
        {"Deconv 3 x 3 x 16, pad 1, ReLU", {4, 4, 16}},
        {"Unpool, 2 x 2", {8, 8, 16}},
        {"Deconv 3 x 3 x 8, pad 1, ReLU", {8, 8, 8}},
        {"Unpool, 2 x 2", {16, 16, 8}},
        {"Deconv 3 x 3 x 1, pad 1, Sigmoid", {16, 16, 1}},
    };
}

struct ParamPins {
    int64_t extractor, generator, image_disc, feature_disc, classifier;
};

inline ParamPins digits_pins() { return {1091840, 7376897, 1060363, 34443, 34314}; }
inline ParamPins digits_sm_pins() { return {1091840, 7442689, 1060363, 34443, 34314}; }
inline ParamPins signs_pins() { return {3584000, 1746371, 4777260, 668972, 668715}; }
inline ParamPins toy_pins() { return {13584, 6689, 9835, 2219, 2186}; }

}  // namespace tables
