#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fxda/core/error.hpp"
#include "fxda/losses/losses.hpp"

namespace fxda {

// shortest-round-trip decimal form, stable across runs of the same build
inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Per-step loss log. One CSV row per training iteration; byte-identical
// output across runs with the same config and seed is a hard requirement, so
// everything funnels through g17 and the header is fixed.
class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path, bool append = false) {
        const bool resume = append && std::filesystem::exists(path) &&
                            std::filesystem::file_size(path) > 0;
        out_.open(path, resume ? std::ios::app : std::ios::trunc);
        if (!out_) throw IntegrityError("cannot open " + path + " for writing");
        if (!resume) {
            out_ << "step,stage";
            for (const std::string& name : LossReport::field_names()) out_ << ',' << name;
            out_ << ",total\n";
        }
    }

    void log_step(int64_t step, const std::string& stage, const LossReport& r) {
        out_ << step << ',' << stage;
        for (double v : r.values()) out_ << ',' << g17(v);
        out_ << ',' << g17(r.total) << '\n';
    }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

}  // namespace fxda
