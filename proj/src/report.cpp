#include "amc/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "amc/errors.hpp"

namespace amc::eval {

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        out.emplace_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& v, char sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += sep;
        s += v[i];
    }
    return s;
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::size_t class_index(const std::vector<std::string>& names, const std::string& name, std::uint64_t line) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    throw ParseError("unknown class '" + name + "' in report", line);
}

}  // namespace

std::uint64_t ConfusionMatrix::support(std::size_t truth) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < n_; ++p) s += at(truth, p);
    return s;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < n_; ++i) s += at(i, i);
    return s;
}

double ConfusionMatrix::accuracy() const {
    const auto t = total();
    return t == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(t);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.n_ != n_)
        throw InvalidArgument("cannot add a " + std::to_string(other.n_) + "-class confusion matrix to a " +
                              std::to_string(n_) + "-class one");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                 std::size_t n_classes) {
    if (truth.size() != predicted.size())
        throw InvalidArgument("confusion_matrix: " + std::to_string(truth.size()) + " labels vs " +
                              std::to_string(predicted.size()) + " predictions");
    ConfusionMatrix m(n_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= n_classes || predicted[i] >= n_classes)
            throw InvalidArgument("confusion_matrix: label out of range at position " + std::to_string(i));
        ++m.at(truth[i], predicted[i]);
    }
    return m;
}

AccuracyBySnr accuracy_by_snr(std::span<const int> snr_db, std::span<const std::size_t> truth,
                              std::span<const std::size_t> predicted) {
    if (snr_db.empty()) throw InvalidArgument("accuracy_by_snr: empty input");
    if (snr_db.size() != truth.size() || truth.size() != predicted.size())
        throw InvalidArgument("accuracy_by_snr: input lengths differ");
    std::map<int, std::uint64_t> hits;
    AccuracyBySnr out;
    std::uint64_t total_hits = 0;
    for (std::size_t i = 0; i < snr_db.size(); ++i) {
        ++out.support[snr_db[i]];
        const bool ok = truth[i] == predicted[i];
        hits[snr_db[i]] += ok ? 1 : 0;
        total_hits += ok ? 1 : 0;
    }
    for (const auto& [snr, n] : out.support)
        out.per_snr[snr] = static_cast<double>(hits[snr]) / static_cast<double>(n);
    out.overall = static_cast<double>(total_hits) / static_cast<double>(snr_db.size());
    return out;
}

ConfusionMatrix EvalReport::overall() const {
    ConfusionMatrix m(class_names.size());
    for (const auto& [snr, c] : by_snr) m += c;
    return m;
}

std::map<int, double> EvalReport::accuracy() const {
    std::map<int, double> a;
    for (const auto& [snr, c] : by_snr) a[snr] = c.accuracy();
    return a;
}

void EvalReport::merge(const EvalReport& other) {
    if (other.class_names != class_names) throw InvalidArgument("cannot merge reports over different classes");
    for (const auto& [snr, c] : other.by_snr) {
        auto it = by_snr.find(snr);
        if (it == by_snr.end())
            by_snr.emplace(snr, c);
        else
            it->second += c;
    }
}

EvalReport build_report(std::span<const int> snr_db, std::span<const std::size_t> truth,
                        std::span<const std::size_t> predicted, std::vector<std::string> class_names) {
    if (snr_db.size() != truth.size() || truth.size() != predicted.size())
        throw InvalidArgument("build_report: input lengths differ");
    EvalReport r;
    r.class_names = std::move(class_names);
    const std::size_t n = r.class_names.size();
    for (std::size_t i = 0; i < snr_db.size(); ++i) {
        if (truth[i] >= n || predicted[i] >= n)
            throw InvalidArgument("build_report: label out of range at position " + std::to_string(i));
        auto it = r.by_snr.try_emplace(snr_db[i], n).first;
        ++it->second.at(truth[i], predicted[i]);
    }
    return r;
}

std::string render_report(const EvalReport& report, ReportFormat format, bool normalized) {
    const auto& names = report.class_names;
    std::ostringstream os;
    if (format == ReportFormat::TextTable) {
        os << "# amc evaluation report\n";
        for (const auto& [k, v] : report.header) os << "# " << k << "=" << v << "\n";
        os << "# classes=" << join(names, ',') << "\n";
        os << "snr_db,accuracy,support\n";
        for (const auto& [snr, c] : report.by_snr) os << snr << "," << fixed(c.accuracy(), 6) << "," << c.total() << "\n";
        const auto all = report.overall();
        os << "overall," << fixed(all.accuracy(), 6) << "," << all.total() << "\n";
        for (const auto& [snr, c] : report.by_snr) {
            os << "# confusion snr_db=" << snr << "\n";
            os << "true\\pred," << join(names, ',') << "\n";
            for (std::size_t t = 0; t < names.size(); ++t) {
                os << names[t];
                for (std::size_t p = 0; p < names.size(); ++p) os << "," << c.at(t, p);
                os << "\n";
            }
        }
        if (normalized) {
            for (const auto& [snr, c] : report.by_snr) {
                os << "# normalized snr_db=" << snr << " (row percent)\n";
                os << "true\\pred," << join(names, ',') << "\n";
                for (std::size_t t = 0; t < names.size(); ++t) {
                    const auto sup = c.support(t);
                    os << names[t];
                    for (std::size_t p = 0; p < names.size(); ++p)
                        os << "," << fixed(sup ? 100.0 * double(c.at(t, p)) / double(sup) : 0.0, 2);
                    os << "\n";
                }
            }
        }
    } else {
        os << "format=structured-text\n";
        for (const auto& [k, v] : report.header) os << "header." << k << "=" << v << "\n";
        os << "classes=" << join(names, ',') << "\n";
        for (const auto& [snr, c] : report.by_snr) {
            os << "accuracy." << snr << "=" << fixed(c.accuracy(), 6) << "\n";
            os << "support." << snr << "=" << c.total() << "\n";
        }
        os << "accuracy.overall=" << fixed(report.overall_accuracy(), 6) << "\n";
        for (const auto& [snr, c] : report.by_snr)
            for (std::size_t t = 0; t < names.size(); ++t)
                for (std::size_t p = 0; p < names.size(); ++p)
                    os << "confusion." << snr << "." << names[t] << "." << names[p] << "=" << c.at(t, p) << "\n";
    }
    return os.str();
}

void emit_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format, bool normalized) {
    const auto text = render_report(report, format, normalized);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write failed on '" + path.string() + "'");
}

EvalReport parse_report(std::string_view text) {
    const auto lines = split(text, '\n');
    EvalReport r;
    if (!lines.empty() && lines[0] == "format=structured-text") {
        for (std::uint64_t ln = 1; ln < lines.size(); ++ln) {
            const auto& line = lines[ln];
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ParseError("report line without '='", ln);
            const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
            if (key.starts_with("header.")) {
                r.header[key.substr(7)] = val;
            } else if (key == "classes") {
                r.class_names = split(val, ',');
            } else if (key.starts_with("confusion.")) {
                const auto parts = split(key.substr(10), '.');
                if (parts.size() != 3) throw ParseError("malformed confusion key '" + key + "'", ln);
                const int snr = std::stoi(parts[0]);
                auto it = r.by_snr.try_emplace(snr, r.class_names.size()).first;
                it->second.at(class_index(r.class_names, parts[1], ln), class_index(r.class_names, parts[2], ln)) =
                    std::stoull(val);
            }
        }
        return r;
    }

    std::uint64_t ln = 0;
    while (ln < lines.size()) {
        const auto& line = lines[ln];
        if (line.starts_with("# confusion snr_db=")) {
            const int snr = std::stoi(line.substr(19));
            if (ln + 2 + r.class_names.size() > lines.size())
                throw ParseError("truncated confusion block", ln);
            ConfusionMatrix m(r.class_names.size());
            for (std::size_t t = 0; t < r.class_names.size(); ++t) {
                const auto cells = split(lines[ln + 2 + t], ',');
                if (cells.size() != r.class_names.size() + 1 || cells[0] != r.class_names[t])
                    throw ParseError("malformed confusion row", ln + 2 + t);
                for (std::size_t p = 0; p < r.class_names.size(); ++p) m.at(t, p) = std::stoull(cells[p + 1]);
            }
            r.by_snr[snr] = std::move(m);
            ln += 2 + r.class_names.size();
            continue;
        }
        if (line.starts_with("# normalized")) {
            ln += 2 + r.class_names.size();
            continue;
        }
        if (line.starts_with("# classes=")) {
            r.class_names = split(line.substr(10), ',');
        } else if (line.starts_with("# ") && line.find('=') != std::string::npos) {
            const auto eq = line.find('=');
            r.header[line.substr(2, eq - 2)] = line.substr(eq + 1);
        }
        ++ln;
    }
    return r;
}

EvalReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_report(ss.str());
}

}  // namespace amc::eval
