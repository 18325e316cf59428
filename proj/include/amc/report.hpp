#pragma once

// Accuracy-vs-SNR curves and per-SNR confusion matrices.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace amc::eval {

/// Square count matrix, rows = true class, columns = predicted class.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t n_classes) : n_(n_classes), counts_(n_classes * n_classes, 0) {}

    std::size_t classes() const { return n_; }
    std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * n_ + pred]; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * n_ + pred]; }

    std::uint64_t support(std::size_t truth) const;
    std::uint64_t total() const;
    std::uint64_t trace() const;
    /// trace / total; 0 for an empty matrix.
    double accuracy() const;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                 std::size_t n_classes);

struct AccuracyBySnr {
    std::map<int, double> per_snr;
    std::map<int, std::uint64_t> support;
    double overall = 0.0;
};

/// Bins with no records are omitted.
AccuracyBySnr accuracy_by_snr(std::span<const int> snr_db, std::span<const std::size_t> truth,
                              std::span<const std::size_t> predicted);

struct EvalReport {
    std::vector<std::string> class_names;
    std::map<int, ConfusionMatrix> by_snr;
    std::map<std::string, std::string> header;  // dataset_hash, model_hash, label_mode, ...

    ConfusionMatrix overall() const;
    double overall_accuracy() const { return overall().accuracy(); }
    std::map<int, double> accuracy() const;

    /// Adds counts from another report over the same class list.
    void merge(const EvalReport& other);
    bool operator==(const EvalReport&) const = default;
};

EvalReport build_report(std::span<const int> snr_db, std::span<const std::size_t> truth,
                        std::span<const std::size_t> predicted, std::vector<std::string> class_names);

enum class ReportFormat { TextTable, StructuredText };

/// Deterministic serialization. `normalized` appends row-normalized
/// percentage blocks after the raw counts (text-table only).
std::string render_report(const EvalReport& report, ReportFormat format, bool normalized = false);
void emit_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format,
                 bool normalized = false);

EvalReport parse_report(std::string_view text);
EvalReport load_report(const std::filesystem::path& path);

}  // namespace amc::eval
