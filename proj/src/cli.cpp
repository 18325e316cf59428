#include "amc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "amc/dataset.hpp"
#include "amc/errors.hpp"
#include "amc/model.hpp"
#include "amc/report.hpp"
#include "amc/trainer.hpp"

namespace amc::cli {

namespace {

namespace fs = std::filesystem;

enum class NumericMode { Reference, Fast };

struct GenerateArgs {
    fs::path out;
    std::optional<std::uint64_t> seed;
    bool desk_scale = false;
    std::optional<std::size_t> signals_per_cell;
    std::size_t n_samples = 1024;
    unsigned threads = 1;
    bool no_splits = false;
    std::string ratios = "8/15,2/15,5/15";
};

struct SplitArgs {
    fs::path dataset;
    std::string ratios = "8/15,2/15,5/15";
    std::uint64_t seed = 0;
};

struct TrainArgs {
    fs::path dataset;
    std::string labels = "family";
    int epochs = 100;
    std::size_t batch = 256;
    double lr = 1e-4;
    int patience = 5;
    double min_delta = 1e-4;
    double dropout = 0.5;
    fs::path out;
    fs::path history;
    std::optional<std::uint64_t> seed;
    std::string mode = "fast";
    unsigned threads = 1;
    bool quiet = false;
};

struct EvalArgs {
    fs::path model;
    fs::path dataset;
    fs::path report;
    std::string split = "auto";
    std::string format = "text-table";
    bool normalized = false;
    std::string mode = "fast";
    unsigned threads = 1;
};

struct ClassifyArgs {
    fs::path model;
    fs::path input;
    std::string mode = "fast";
    unsigned threads = 1;
};

struct InspectArgs {
    fs::path dataset;
    fs::path model;
};

struct TapsArgs {
    double rolloff = 0.35;
    unsigned oversampling = 2;
    unsigned span = 8;
};

NumericMode parse_mode(const std::string& s) {
    if (s == "reference") return NumericMode::Reference;
    if (s == "fast") return NumericMode::Fast;
    throw InvalidArgument("unknown numeric mode '" + s + "' (expected reference or fast)");
}

double parse_fraction(const std::string& s) {
    const auto slash = s.find('/');
    std::size_t used = 0;
    if (slash == std::string::npos) {
        const double v = std::stod(s, &used);
        if (used != s.size()) throw InvalidArgument("bad ratio '" + s + "'");
        return v;
    }
    const double num = std::stod(s.substr(0, slash));
    const double den = std::stod(s.substr(slash + 1));
    if (!(den > 0.0)) throw InvalidArgument("bad ratio '" + s + "'");
    return num / den;
}

std::array<double, 3> parse_ratios(const std::string& s) {
    std::array<double, 3> r{};
    std::stringstream ss(s);
    std::string part;
    std::size_t i = 0;
    while (std::getline(ss, part, ',')) {
        if (i >= 3) throw InvalidArgument("expected three split ratios, got '" + s + "'");
        try {
            r[i++] = parse_fraction(part);
        } catch (const std::logic_error&) {
            throw InvalidArgument("bad ratio '" + part + "'");
        }
    }
    if (i != 3) throw InvalidArgument("expected three split ratios, got '" + s + "'");
    return r;
}

void print_census(std::ostream& out, const data::DatasetManifest& m) {
    std::map<std::uint16_t, std::map<data::ChannelKind, std::size_t>> by_mod;
    std::map<data::ChannelKind, std::size_t> by_channel;
    std::map<int, std::size_t> by_snr;
    for (const auto& [cell, n] : m.cells) {
        by_mod[cell.modulation][cell.channel] += n;
        by_channel[cell.channel] += n;
        by_snr[cell.snr_db] += n;
    }
    out << std::left << std::setw(10) << "modulation";
    for (const auto& [k, n] : by_channel) out << std::right << std::setw(18) << channel::kind_name(k);
    out << std::setw(10) << "total" << "\n";
    for (const auto& [mod, row] : by_mod) {
        std::size_t total = 0;
        out << std::left << std::setw(10) << data::modulation_name(mod);
        for (const auto& [k, unused] : by_channel) {
            const auto it = row.find(k);
            const std::size_t n = it == row.end() ? 0 : it->second;
            total += n;
            out << std::right << std::setw(18) << n;
        }
        out << std::setw(10) << total << "\n";
    }
    out << std::left << "snr levels: " << by_snr.size() << " (" << by_snr.begin()->first << " .. "
        << by_snr.rbegin()->first << " dB)\n";
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& [cell, n] : m.cells) {
        lo = std::min(lo, n);
        hi = std::max(hi, n);
    }
    out << "cells: " << m.cells.size() << ", records per cell: " << lo << (lo == hi ? "" : " .. " + std::to_string(hi))
        << "\n";
    out << "records: " << m.record_count << "\n";
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    if (!a.seed) throw InvalidArgument("generate: --seed is required");
    auto cfg = a.desk_scale ? data::GenerationConfig::desk_scale(*a.seed) : data::GenerationConfig::paper_scale(*a.seed);
    if (a.signals_per_cell) cfg.signals_per_cell = *a.signals_per_cell;
    cfg.n_samples = a.n_samples;
    cfg.threads = a.threads;
    cfg.validate();
    const auto ratios = parse_ratios(a.ratios);

    data::ContainerWriter writer(a.out, static_cast<std::uint32_t>(cfg.n_samples));
    auto manifest = data::generate_dataset(cfg, writer);
    writer.finish();
    data::write_manifest(manifest, data::manifest_path(a.out));
    if (!a.no_splits) {
        const auto splits = data::split_dataset(manifest.record_cells, ratios, cfg.master_seed);
        data::write_split_files(splits, a.out);
        out << "splits: train " << splits.train.size() << ", val " << splits.val.size() << ", test "
            << splits.test.size() << "\n";
    }
    print_census(out, manifest);
    out << "config_hash: " << std::hex << std::setw(16) << std::setfill('0') << manifest.config_hash << std::dec
        << std::setfill(' ') << "\n";
    out << "file_hash: " << data::file_hash(a.out) << "\n";
    return kOk;
}

int cmd_split(const SplitArgs& a, std::ostream& out) {
    const auto records = data::load_container(a.dataset);
    const auto m = data::manifest_from_records(records, a.seed);
    const auto splits = data::split_dataset(m.record_cells, parse_ratios(a.ratios), a.seed);
    data::write_split_files(splits, a.dataset);
    out << "splits: train " << splits.train.size() << ", val " << splits.val.size() << ", test "
        << splits.test.size() << "\n";
    return kOk;
}

template <typename T>
int train_with(const TrainArgs& a, const std::vector<data::IQRecord>& records, const data::SplitSets& splits,
               std::ostream& out) {
    const auto mode = model::parse_label_mode(a.labels);
    auto cfg = model::config_for(records, mode, *a.seed);
    cfg.dropout = a.dropout;
    model::CnnModel<T> net(cfg);
    const auto labels = model::LabelMap::for_records(mode, records);
    const auto train_set = model::make_samples(records, labels, splits.train);
    const auto val_set = model::make_samples(records, labels, splits.val);

    model::TrainOptions opt;
    opt.batch_size = a.batch;
    opt.max_epochs = a.epochs;
    opt.patience = a.patience;
    opt.min_delta = a.min_delta;
    opt.adam.learning_rate = a.lr;
    opt.threads = a.threads;
    opt.seed = *a.seed;
    if (!a.quiet) {
        opt.on_epoch = [&out](const model::EpochRecord& r) {
            out << "epoch " << r.epoch << ": train_loss " << r.train_loss << ", val_loss " << r.val_loss
                << ", val_acc " << r.val_accuracy << std::endl;
            return true;
        };
    }
    out << "model: " << net.shape_trace().front().shape[0] << "x" << cfg.input_width << " input, " << cfg.n_classes
        << " classes (" << model::label_mode_name(mode) << "), " << net.parameter_count() << " parameters\n";
    out << "train " << train_set.size() << " / val " << val_set.size() << " records\n";
    out << "adam: lr " << a.lr << ", batch " << a.batch << ", dropout " << a.dropout << ", max epochs " << a.epochs
        << ", patience " << a.patience << "\n";
    const auto state = model::train(net, train_set, val_set, opt);

    nn::save_checkpoint(net.to_checkpoint(), a.out);
    fs::path hist = a.history;
    if (hist.empty()) {
        hist = a.out;
        hist += ".history.csv";
    }
    std::ofstream h(hist, std::ios::trunc);
    if (!h) throw IoError("cannot open '" + hist.string() + "' for writing");
    model::write_history(h, state.history);
    if (!h) throw IoError("write failed on '" + hist.string() + "'");
    out << "best epoch " << state.best_epoch << " (val_loss " << state.best_val_loss << ")"
        << (state.early_stopped ? ", stopped early" : "") << "\n";
    out << "checkpoint: " << a.out.string() << "\nhistory: " << hist.string() << "\n";
    return kOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
    if (!a.seed) throw InvalidArgument("train: --seed is required");
    if (!data::has_split_files(a.dataset))
        throw InvalidArgument("train: dataset '" + a.dataset.string() +
                              "' has no split files; run `amc split --dataset ...` first");
    const auto records = data::load_container(a.dataset);
    const auto splits = data::read_split_files(a.dataset);
    return parse_mode(a.mode) == NumericMode::Reference ? train_with<double>(a, records, splits, out)
                                                        : train_with<float>(a, records, splits, out);
}

template <typename T>
model::CnnModel<T> load_model(const fs::path& p) {
    return model::CnnModel<T>::from_checkpoint(nn::load_checkpoint(p));
}

template <typename T>
void check_geometry(const model::CnnModel<T>& net, const std::vector<data::IQRecord>& records) {
    if (records.empty()) return;
    const auto& c = net.config();
    const std::size_t len = records.front().samples.size();
    if (len != c.input_width)
        throw GeometryMismatch("model expects input 2x" + std::to_string(c.input_width) + ", dataset records are 2x" +
                               std::to_string(len));
    const bool rml = data::is_radioml_id(records.front().modulation);
    if (c.label_mode == model::LabelMode::Variant && rml != c.radioml)
        throw GeometryMismatch(std::string("model classifies ") + (c.radioml ? "RadioML" : "native") +
                               " variants, dataset holds " + (rml ? "RadioML" : "native") + " records");
}

template <typename T>
int eval_with(const EvalArgs& a, std::ostream& out) {
    const auto net = load_model<T>(a.model);
    const auto records = data::load_container(a.dataset);
    check_geometry(net, records);
    const auto labels = model::LabelMap::for_records(net.config().label_mode, records);

    std::vector<std::uint64_t> ids;
    std::string split = a.split;
    if (split == "auto") split = data::has_split_files(a.dataset) ? "test" : "all";
    if (split == "all") {
        ids.resize(records.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    } else {
        const auto s = data::read_split_files(a.dataset);
        if (split == "train")
            ids = s.train;
        else if (split == "val")
            ids = s.val;
        else if (split == "test")
            ids = s.test;
        else
            throw InvalidArgument("unknown split '" + split + "'");
    }
    const auto samples = model::make_samples(records, labels, ids);
    const auto pred = model::predict(net, samples, 64, a.threads);

    std::vector<int> snr(samples.size());
    std::vector<std::size_t> truth(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        snr[i] = static_cast<int>(samples[i].snr_db);
        truth[i] = samples[i].label;
    }
    auto report = eval::build_report(snr, truth, pred.labels, labels.names());
    report.header["dataset_hash"] = data::file_hash(a.dataset);
    report.header["model_hash"] = data::file_hash(a.model);
    report.header["label_mode"] = std::string(model::label_mode_name(labels.mode()));
    report.header["split"] = split;
    const auto fmt = a.format == "structured-text" ? eval::ReportFormat::StructuredText
                     : a.format == "text-table"    ? eval::ReportFormat::TextTable
                                                   : throw InvalidArgument("unknown report format '" + a.format + "'");
    eval::emit_report(report, a.report, fmt, a.normalized);

    out << "snr_db,accuracy\n";
    for (const auto& [s, acc] : report.accuracy()) out << s << "," << std::fixed << std::setprecision(4) << acc << "\n";
    out << "overall," << report.overall_accuracy() << "\n" << std::defaultfloat;
    out << "report: " << a.report.string() << "\n";
    return kOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    return parse_mode(a.mode) == NumericMode::Reference ? eval_with<double>(a, out) : eval_with<float>(a, out);
}

template <typename T>
int classify_with(const ClassifyArgs& a, std::ostream& out) {
    const auto net = load_model<T>(a.model);
    const auto records = data::load_container(a.input);
    check_geometry(net, records);
    std::vector<model::LabeledSample> samples;
    samples.reserve(records.size());
    for (const auto& r : records) samples.push_back({r.samples, 0, double(r.snr_db)});
    const auto pred = model::predict(net, samples, 64, a.threads);
    const auto names = net.config().label_mode == model::LabelMode::Family ? model::LabelMap::families().names()
                       : net.config().radioml ? model::LabelMap::radioml_variants().names()
                                              : model::LabelMap::native_variants().names();
    out << std::setprecision(9);
    for (std::size_t i = 0; i < records.size(); ++i) {
        out << i << "," << names.at(pred.labels[i]);
        for (double p : pred.probabilities[i]) out << "," << p;
        out << "\n";
    }
    return kOk;
}

int cmd_classify(const ClassifyArgs& a, std::ostream& out) {
    return parse_mode(a.mode) == NumericMode::Reference ? classify_with<double>(a, out) : classify_with<float>(a, out);
}

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
    if (a.dataset.empty() && a.model.empty()) throw InvalidArgument("inspect: give --dataset and/or --model");
    if (!a.dataset.empty()) {
        const auto hdr = data::read_container_header(a.dataset);
        out << "container: " << a.dataset.string() << "\nversion: " << hdr.version << "\nrecords: " << hdr.count
            << "\nsamples_per_record: " << hdr.samples_per_record << "\n";
        const auto records = data::load_container(a.dataset);
        if (!records.empty()) print_census(out, data::manifest_from_records(records, 0));
    }
    if (!a.model.empty()) {
        const auto net = load_model<float>(a.model);
        out << "checkpoint: " << a.model.string() << "\n";
        for (const auto& row : net.shape_trace()) out << std::left << std::setw(14) << row.name << nn::shape_string(row.shape) << "\n";
        out << "trainable parameters: " << net.parameter_count() << "\n";
    }
    return kOk;
}

int cmd_rc_taps(const TapsArgs& a, std::ostream& out) {
    dsp::ShapingConfig s;
    s.rolloff = a.rolloff;
    s.oversampling = a.oversampling;
    s.span = a.span;
    out << std::setprecision(17);
    for (double t : dsp::raised_cosine_taps(s)) out << t << "\n";
    return kOk;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// Turns a key=value file into `--key=value` tokens. Blank lines and lines
// starting with '#' are skipped.
std::vector<std::string> config_tokens(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path.string() + "'");
    std::vector<std::string> out;
    std::string line;
    for (std::uint64_t ln = 1; std::getline(in, line); ++ln) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("config line without '=' in " + path.string(), ln);
        std::string key = trim(line.substr(0, eq));
        std::replace(key.begin(), key.end(), '_', '-');
        if (key.empty() || key == "config") throw ParseError("bad config key in " + path.string(), ln);
        out.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
    }
    return out;
}

// Arguments with the --config file expanded in front of the subcommand's own
// flags; CLI11 keeps the last value, so explicit flags win.
std::vector<std::string> expand_config(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string file;
        std::size_t erase = 0;
        if (args[i] == "--config" && i + 1 < args.size()) {
            file = args[i + 1];
            erase = 2;
        } else if (args[i].starts_with("--config=")) {
            file = args[i].substr(9);
            erase = 1;
        } else {
            continue;
        }
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + erase));
        const auto extra = config_tokens(file);
        const std::size_t at = args.empty() ? 0 : 1;  // right after the subcommand name
        args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), extra.begin(), extra.end());
        break;
    }
    return args;
}

// Listed for --help only; expand_config consumes it before parsing.
void add_config(CLI::App* sub, std::string& sink) {
    sub->add_option("--config", sink, "key=value file mirroring the flags; flags override it");
}

void add_threads(CLI::App* sub, unsigned& threads) {
    sub->add_option("--threads", threads, "Worker threads")->envname("AMC_THREADS")->check(CLI::Range(1u, 1024u));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"amc: modulation-family classification workbench"};
    app.require_subcommand(1);
    app.name("amc");
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_sink;

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Synthesize a dataset into a HisarIQ container");
    add_config(g, config_sink);
    g->add_option("--out", gen.out, "Output container path")->required();
    g->add_option("--seed", gen.seed, "Master seed");
    g->add_flag("--desk-scale", gen.desk_scale, "2 signals per cell instead of 300");
    g->add_option("--signals-per-cell", gen.signals_per_cell, "Records per (modulation, SNR, channel) cell");
    g->add_option("--n-samples", gen.n_samples, "I/Q samples per record");
    g->add_option("--ratios", gen.ratios, "train,val,test split ratios");
    g->add_flag("--no-splits", gen.no_splits, "Do not write split files");
    add_threads(g, gen.threads);

    SplitArgs spl;
    auto* s = app.add_subcommand("split", "Write stratified train/val/test split files");
    add_config(s, config_sink);
    s->add_option("--dataset", spl.dataset, "Container path")->required();
    s->add_option("--ratios", spl.ratios, "train,val,test split ratios");
    s->add_option("--seed", spl.seed, "Shuffle seed");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train the CNN on a split dataset");
    add_config(t, config_sink);
    t->add_option("--dataset", tr.dataset, "Container path (with split files)")->required();
    t->add_option("--labels", tr.labels, "family | variant");
    t->add_option("--epochs", tr.epochs, "Maximum epochs");
    t->add_option("--batch", tr.batch, "Mini-batch size");
    t->add_option("--lr", tr.lr, "ADAM learning rate");
    t->add_option("--patience", tr.patience, "Early-stopping patience (epochs)");
    t->add_option("--min-delta", tr.min_delta, "Minimum validation-loss improvement");
    t->add_option("--dropout", tr.dropout, "Dropout rate");
    t->add_option("--out", tr.out, "Checkpoint output path")->required();
    t->add_option("--history", tr.history, "History table path (default <out>.history.csv)");
    t->add_option("--seed", tr.seed, "Training seed");
    t->add_option("--mode", tr.mode, "reference (64-bit) | fast (32-bit)");
    t->add_flag("--quiet", tr.quiet, "No per-epoch progress");
    add_threads(t, tr.threads);

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Accuracy-by-SNR and confusion reports");
    add_config(e, config_sink);
    e->add_option("--model", ev.model, "Checkpoint path")->required();
    e->add_option("--dataset", ev.dataset, "Container path")->required();
    e->add_option("--report", ev.report, "Report output path")->required();
    e->add_option("--split", ev.split, "auto | all | train | val | test");
    e->add_option("--format", ev.format, "text-table | structured-text");
    e->add_flag("--normalized", ev.normalized, "Append row-normalized confusion blocks");
    e->add_option("--mode", ev.mode, "reference | fast");
    add_threads(e, ev.threads);

    ClassifyArgs cl;
    auto* c = app.add_subcommand("classify", "Print per-record predictions");
    add_config(c, config_sink);
    c->add_option("--model", cl.model, "Checkpoint path")->required();
    c->add_option("--input", cl.input, "HisarIQ container")->required();
    c->add_option("--mode", cl.mode, "reference | fast");
    add_threads(c, cl.threads);

    InspectArgs in;
    auto* i = app.add_subcommand("inspect", "Summarize a container and/or checkpoint");
    i->add_option("--dataset", in.dataset, "Container path");
    i->add_option("--model", in.model, "Checkpoint path");

    TapsArgs taps;
    auto* r = app.add_subcommand("rc-taps", "Print raised-cosine taps, one per line");
    r->add_option("--rolloff", taps.rolloff, "Roll-off factor");
    r->add_option("--oversampling", taps.oversampling, "Samples per symbol");
    r->add_option("--span", taps.span, "Filter half-length in symbols");

    std::vector<std::string> args;
    try {
        args = expand_config(argc, argv);
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return kIo;
    }
    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex, out, err);
        err << app.help();
        return kUsage;
    }

    try {
        if (g->parsed()) return cmd_generate(gen, out);
        if (s->parsed()) return cmd_split(spl, out);
        if (t->parsed()) return cmd_train(tr, out);
        if (e->parsed()) return cmd_eval(ev, out);
        if (c->parsed()) return cmd_classify(cl, out);
        if (i->parsed()) return cmd_inspect(in, out);
        if (r->parsed()) return cmd_rc_taps(taps, out);
    } catch (const GeometryMismatch& ex) {
        err << "error: " << ex.what() << "\n";
        return kGeometry;
    } catch (const TrainingDivergence& ex) {
        err << "error: " << ex.what() << "\n";
        return kTraining;
    } catch (const ParseError& ex) {
        err << "error: " << ex.what() << "\n";
        return kIo;
    } catch (const IoError& ex) {
        err << "error: " << ex.what() << "\n";
        return kIo;
    } catch (const ShapeError& ex) {
        err << "error: " << ex.what() << "\n";
        return kGeometry;
    } catch (const std::invalid_argument& ex) {
        err << "error: " << ex.what() << "\n";
        return kUsage;
    } catch (const StratificationError& ex) {
        err << "error: " << ex.what() << "\n";
        return kUsage;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return kFailure;
    }
    return kUsage;
}

}  // namespace amc::cli
