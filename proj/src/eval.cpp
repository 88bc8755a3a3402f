#include "forgetd/eval.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace forgetd {

namespace {

std::vector<std::uint32_t> predict_labels(const ModelParams& w, const Dataset& ds) {
    const std::size_t n = ds.size();
    const std::size_t chunk = 512;
    std::vector<std::uint32_t> pred(n);
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t stop = std::min(start + chunk, n);
        Batch b = slice_batch(ds, start, stop);
        Tensor logits = forward(w, b.inputs);
        const std::size_t classes = logits.shape[1];
        auto L = logits.as_matrix(stop - start, classes);
        for (std::size_t i = 0; i < stop - start; ++i) {
            std::uint32_t best = 0;
            for (std::size_t c = 1; c < classes; ++c) {
                if (L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) >
                    L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best)))
                    best = static_cast<std::uint32_t>(c);
            }
            pred[start + i] = best;
        }
    }
    return pred;
}

void tally_per_class(const ModelParams& w, const Dataset& ds,
                     std::map<std::uint32_t, std::pair<std::size_t, std::size_t>>& tally) {
    const std::vector<std::uint32_t> pred = predict_labels(w, ds);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto& [correct, total] = tally[ds.labels[i]];
        ++total;
        if (pred[i] == ds.labels[i]) ++correct;
    }
}

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

std::string frac(double x) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << x;
    return os.str();
}

}  // namespace

double round6(double x) {
    return static_cast<double>(std::llround(x * 1e6)) / 1e6;
}

double accuracy(const ModelParams& w, const Dataset& ds) {
    if (ds.size() == 0) throw InputError("accuracy over an empty dataset");
    const std::vector<std::uint32_t> pred = predict_labels(w, ds);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) correct += pred[i] == ds.labels[i] ? 1u : 0u;
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

std::map<std::uint32_t, double> per_class_accuracy(const ModelParams& w, const Dataset& ds) {
    std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> tally;
    tally_per_class(w, ds, tally);
    std::map<std::uint32_t, double> out;
    for (const auto& [cls, ct] : tally)
        out[cls] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
    return out;
}

MetricsReport membership_inference_report(const ModelParams& w_before, const ModelParams& w_after,
                                          const SplitPair& split,
                                          const std::vector<TrajectoryPoint>& trajectory,
                                          const Ledger* ledger_full, const Ledger* ledger_pruned) {
    MetricsReport r;
    r.before_targeted = round6(accuracy(w_before, split.targeted));
    r.before_retained = round6(accuracy(w_before, split.retained));
    r.after_targeted = round6(accuracy(w_after, split.targeted));
    r.after_retained = round6(accuracy(w_after, split.retained));

    std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> tally;
    tally_per_class(w_after, split.targeted, tally);
    tally_per_class(w_after, split.retained, tally);
    for (const auto& [cls, ct] : tally)
        r.per_class[cls] = round6(static_cast<double>(ct.first) / static_cast<double>(ct.second));

    r.trajectory = trajectory;
    for (TrajectoryPoint& p : r.trajectory) {
        p.targeted_acc = round6(p.targeted_acc);
        p.retained_acc = round6(p.retained_acc);
    }
    if (ledger_full) r.ledger_bytes_full = ledger_size_bytes(*ledger_full);
    if (ledger_pruned) r.ledger_bytes_pruned = ledger_size_bytes(*ledger_pruned);
    return r;
}

void emit_report(const MetricsReport& report, const std::string& path, ReportFormat format) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");

    if (format == ReportFormat::csv) {
        out << "epoch,targeted_acc,retained_acc\n";
        for (const TrajectoryPoint& p : report.trajectory)
            out << p.epoch << "," << frac(p.targeted_acc) << "," << frac(p.retained_acc) << "\n";
        if (!out) throw IoError("short write to " + path);
        return;
    }

    out << "{\n  \"config\": {";
    bool first = true;
    for (const auto& [k, v] : report.config) {
        out << (first ? "" : ",") << "\n    \"" << json_escape(k) << "\": \"" << json_escape(v)
            << "\"";
        first = false;
    }
    out << (first ? "" : "\n  ") << "},\n";
    out << "  \"before\": {\"targeted_acc\": " << frac(report.before_targeted)
        << ", \"retained_acc\": " << frac(report.before_retained) << "},\n";
    out << "  \"after\": {\"targeted_acc\": " << frac(report.after_targeted)
        << ", \"retained_acc\": " << frac(report.after_retained) << "},\n";
    out << "  \"per_class\": {";
    first = true;
    for (const auto& [cls, acc] : report.per_class) {
        out << (first ? "" : ",") << "\n    \"" << cls << "\": " << frac(acc);
        first = false;
    }
    out << (first ? "" : "\n  ") << "},\n";
    out << "  \"trajectory\": [";
    first = true;
    for (const TrajectoryPoint& p : report.trajectory) {
        out << (first ? "" : ",") << "\n    {\"epoch\": " << p.epoch
            << ", \"targeted_acc\": " << frac(p.targeted_acc)
            << ", \"retained_acc\": " << frac(p.retained_acc) << "}";
        first = false;
    }
    out << (first ? "" : "\n  ") << "],\n";
    out << "  \"storage\": {\"ledger_bytes_full\": " << report.ledger_bytes_full
        << ", \"ledger_bytes_pruned\": " << report.ledger_bytes_pruned << "},\n";
    out << "  \"sweep\": [";
    first = true;
    for (const SweepRow& row : report.sweep) {
        out << (first ? "" : ",") << "\n    {\"fraction\": " << frac(row.fraction)
            << ", \"affected_pct\": " << frac(row.affected_pct) << ", \"method\": \""
            << json_escape(row.method) << "\", \"retained_acc\": " << frac(row.retained_acc)
            << "}";
        first = false;
    }
    out << (first ? "" : "\n  ") << "]\n}\n";
    if (!out) throw IoError("short write to " + path);
}

MetricsReport parse_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError("malformed report " + path + ": " + e.what());
    }
    MetricsReport r;
    try {
        for (auto it = j.at("config").begin(); it != j.at("config").end(); ++it)
            r.config[it.key()] = it.value().get<std::string>();
        r.before_targeted = j.at("before").at("targeted_acc").get<double>();
        r.before_retained = j.at("before").at("retained_acc").get<double>();
        r.after_targeted = j.at("after").at("targeted_acc").get<double>();
        r.after_retained = j.at("after").at("retained_acc").get<double>();
        for (auto it = j.at("per_class").begin(); it != j.at("per_class").end(); ++it)
            r.per_class[static_cast<std::uint32_t>(std::stoul(it.key()))] =
                it.value().get<double>();
        for (const auto& p : j.at("trajectory"))
            r.trajectory.push_back({p.at("epoch").get<std::size_t>(),
                                    p.at("targeted_acc").get<double>(),
                                    p.at("retained_acc").get<double>()});
        r.ledger_bytes_full = j.at("storage").at("ledger_bytes_full").get<std::uint64_t>();
        r.ledger_bytes_pruned = j.at("storage").at("ledger_bytes_pruned").get<std::uint64_t>();
        for (const auto& row : j.at("sweep"))
            r.sweep.push_back({row.at("fraction").get<double>(),
                               row.at("affected_pct").get<double>(),
                               row.at("method").get<std::string>(),
                               row.at("retained_acc").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError("report " + path + " missing fields: " + e.what());
    }
    return r;
}

void emit_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "fraction,affected_pct,method,retained_acc\n";
    for (const SweepRow& row : rows)
        out << frac(row.fraction) << "," << frac(row.affected_pct) << "," << row.method << ","
            << frac(row.retained_acc) << "\n";
    if (!out) throw IoError("short write to " + path);
}

}  // namespace forgetd
