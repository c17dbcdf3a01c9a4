#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "fxda/core/error.hpp"
#include "fxda/eval/evaluate.hpp"
#include "fxda/io/metrics.hpp"

namespace fxda {

constexpr int kReportSchema = 1;

/// Structured record per evaluation: one JSON file keyed by step plus an
/// append-only CSV of the scalar fields. Doubles go through g17 so repeated
/// identical runs rewrite identical bytes.
inline void write_report(const EvalReport& r, const std::string& dir) {
    std::filesystem::create_directories(dir);

    const std::string json_path = dir + "/report_step" + std::to_string(r.step) + ".json";
    {
        std::ofstream out(json_path, std::ios::trunc);
        if (!out) throw IntegrityError("cannot open " + json_path + " for writing");
        out << "{\n";
        out << "  \"schema\": " << kReportSchema << ",\n";
        out << "  \"step\": " << r.step << ",\n";
        out << "  \"stage\": \"" << r.stage << "\",\n";
        out << "  \"config_hash\": \"" << r.config_hash << "\",\n";
        out << "  \"target_accuracy\": " << g17(r.target_accuracy) << ",\n";
        out << "  \"source_accuracy\": " << g17(r.source_accuracy) << ",\n";
        out << "  \"semantic_agreement\": " << g17(r.semantic_agreement) << ",\n";
        out << "  \"feedback_loss\": " << g17(r.feedback_loss) << ",\n";
        out << "  \"classes\": [";
        for (size_t i = 0; i < r.classes.size(); ++i)
            out << (i ? ", " : "") << r.classes[i];
        out << "],\n";
        out << "  \"per_class_accuracy\": [";
        for (size_t i = 0; i < r.per_class.size(); ++i)
            out << (i ? ", " : "") << g17(r.per_class[i]);
        out << "]\n}\n";
        if (!out) throw IntegrityError("short write to " + json_path);
    }

    const std::string csv_path = dir + "/reports.csv";
    const bool fresh =
        !std::filesystem::exists(csv_path) || std::filesystem::file_size(csv_path) == 0;
    std::ofstream csv(csv_path, std::ios::app);
    if (!csv) throw IntegrityError("cannot open " + csv_path + " for writing");
    if (fresh)
        csv << "schema,step,stage,config_hash,target_accuracy,source_accuracy,"
               "semantic_agreement,feedback_loss\n";
    csv << kReportSchema << ',' << r.step << ',' << r.stage << ',' << r.config_hash << ','
        << g17(r.target_accuracy) << ',' << g17(r.source_accuracy) << ','
        << g17(r.semantic_agreement) << ',' << g17(r.feedback_loss) << '\n';
    if (!csv) throw IntegrityError("short write to " + csv_path);
}

}  // namespace fxda
