#include "amc/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "amc/errors.hpp"
#include "amc/rng.hpp"

namespace amc::data {

namespace {

constexpr std::array<Family, 10> kRadioMLFamilies{Family::Analog, Family::Analog, Family::FSK, Family::FSK,
                                                  Family::PAM,    Family::PSK,    Family::PSK, Family::PSK,
                                                  Family::QAM,    Family::QAM};

template <typename T>
void put_le(std::string& buf, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xffu));
}

template <typename T>
T get_le(const unsigned char* p) {
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
    return static_cast<T>(u);
}

std::string encode_header(const ContainerHeader& h) {
    std::string buf(kContainerMagic.begin(), kContainerMagic.end());
    put_le<std::uint16_t>(buf, h.version);
    put_le<std::uint64_t>(buf, h.count);
    put_le<std::uint32_t>(buf, h.samples_per_record);
    return buf;
}

ContainerHeader decode_header(const unsigned char* p, std::size_t available) {
    if (available < 4) throw ParseError("truncated container header", available);
    if (std::memcmp(p, kContainerMagic.data(), 4) != 0) throw ParseError("bad container magic, expected HIQ1", 0);
    if (available < kContainerHeaderBytes) throw ParseError("truncated container header", available);
    ContainerHeader h;
    h.version = get_le<std::uint16_t>(p + 4);
    if (h.version != kContainerVersion)
        throw ParseError("unsupported container version " + std::to_string(h.version), 4);
    h.count = get_le<std::uint64_t>(p + 6);
    h.samples_per_record = get_le<std::uint32_t>(p + 14);
    return h;
}

std::size_t record_bytes(std::uint32_t samples) { return kRecordHeaderBytes + 8u * samples; }

std::string encode_record(const IQRecord& r) {
    std::string buf;
    buf.reserve(record_bytes(static_cast<std::uint32_t>(r.samples.size())));
    put_le<std::uint16_t>(buf, r.modulation);
    put_le<std::uint8_t>(buf, r.family);
    put_le<std::uint8_t>(buf, static_cast<std::uint8_t>(r.channel));
    put_le<std::int16_t>(buf, r.snr_db);
    put_le<std::uint16_t>(buf, 0);
    put_le<std::uint64_t>(buf, r.seed);
    for (const auto& s : r.samples) {
        put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(s.real()));
        put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(s.imag()));
    }
    return buf;
}

IQRecord decode_record(const unsigned char* p, std::uint32_t samples, std::uint64_t offset) {
    IQRecord r;
    r.modulation = get_le<std::uint16_t>(p);
    if (!is_native_id(r.modulation) && !is_radioml_id(r.modulation))
        throw ParseError("unknown modulation id " + std::to_string(r.modulation), offset);
    r.family = p[2];
    if (r.family >= dsp::kFamilyCount) throw ParseError("unknown family id " + std::to_string(r.family), offset + 2);
    try {
        r.channel = channel::kind_from_id(p[3]);
    } catch (const InvalidArgument&) {
        throw ParseError("unknown channel kind id " + std::to_string(p[3]), offset + 3);
    }
    r.snr_db = get_le<std::int16_t>(p + 4);
    r.seed = get_le<std::uint64_t>(p + 8);
    r.samples.resize(samples);
    const unsigned char* s = p + kRecordHeaderBytes;
    for (std::uint32_t i = 0; i < samples; ++i) {
        const float re = std::bit_cast<float>(get_le<std::uint32_t>(s + 8 * i));
        const float im = std::bit_cast<float>(get_le<std::uint32_t>(s + 8 * i + 4));
        r.samples[i] = {re, im};
    }
    return r;
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

}  // namespace

bool is_native_id(std::uint16_t id) { return id < dsp::kVariantCount; }

bool is_radioml_id(std::uint16_t id) { return id >= kRadioMLBase && id < kRadioMLBase + kRadioMLNames.size(); }

std::string modulation_name(std::uint16_t id) {
    if (is_native_id(id)) return std::string(dsp::variant_name(static_cast<Variant>(id)));
    if (is_radioml_id(id)) return std::string(kRadioMLNames[id - kRadioMLBase]);
    throw InvalidArgument("unknown modulation id " + std::to_string(id));
}

Family family_of_id(std::uint16_t id) {
    if (is_native_id(id)) return dsp::family_of(static_cast<Variant>(id));
    if (is_radioml_id(id)) return kRadioMLFamilies[id - kRadioMLBase];
    throw InvalidArgument("unknown modulation id " + std::to_string(id));
}

std::uint16_t modulation_id(std::string_view name) {
    for (auto v : dsp::all_variants())
        if (dsp::variant_name(v) == name) return static_cast<std::uint16_t>(v);
    for (std::size_t i = 0; i < kRadioMLNames.size(); ++i)
        if (kRadioMLNames[i] == name) return static_cast<std::uint16_t>(kRadioMLBase + i);
    throw InvalidArgument("unknown modulation type '" + std::string(name) + "'");
}

Family family_of(std::string_view variant) { return dsp::family_of(dsp::parse_variant(variant)); }

const std::vector<int>& snr_grid() {
    static const std::vector<int> grid = [] {
        std::vector<int> g;
        for (int s = -20; s <= 18; s += 2) g.push_back(s);
        return g;
    }();
    return grid;
}

CellKey cell_of(const IQRecord& r) { return {r.modulation, r.snr_db, r.channel}; }

Census census(std::span<const CellKey> keys) {
    Census c;
    for (const auto& k : keys) ++c[k];
    return c;
}

// ---------------------------------------------------------------- container

ContainerWriter::ContainerWriter(const std::filesystem::path& path, std::uint32_t samples_per_record)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), samples_per_record_(samples_per_record) {
    if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
    const auto hdr = encode_header({kContainerVersion, 0, samples_per_record});
    out_.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    if (!out_) throw IoError("write failed on '" + path_.string() + "'");
}

ContainerWriter::~ContainerWriter() {
    if (!finished_) {
        try {
            finish();
        } catch (...) {
        }
    }
}

void ContainerWriter::write(const IQRecord& rec) {
    if (finished_) throw InvalidArgument("ContainerWriter: write after finish");
    if (rec.samples.size() != samples_per_record_)
        throw InvalidArgument("record has " + std::to_string(rec.samples.size()) + " samples, container expects " +
                              std::to_string(samples_per_record_));
    const auto buf = encode_record(rec);
    out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out_) throw IoError("write failed on '" + path_.string() + "'");
    ++count_;
}

void ContainerWriter::finish() {
    if (finished_) return;
    finished_ = true;
    const auto hdr = encode_header({kContainerVersion, count_, samples_per_record_});
    out_.seekp(0);
    out_.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    out_.close();
    if (!out_) throw IoError("write failed on '" + path_.string() + "'");
}

ContainerReader::ContainerReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open '" + path.string() + "'");
    std::array<unsigned char, kContainerHeaderBytes> buf{};
    in_.read(reinterpret_cast<char*>(buf.data()), buf.size());
    header_ = decode_header(buf.data(), static_cast<std::size_t>(in_.gcount()));
    in_.clear();
    in_.seekg(0, std::ios::end);
    const auto size = static_cast<std::uint64_t>(in_.tellg());
    const std::uint64_t expected = kContainerHeaderBytes + header_.count * record_bytes(header_.samples_per_record);
    if (size < expected) {
        const std::uint64_t complete = (size - kContainerHeaderBytes) / record_bytes(header_.samples_per_record);
        throw ParseError("truncated container: header declares " + std::to_string(header_.count) +
                             " records, file holds " + std::to_string(complete),
                         size);
    }
}

IQRecord ContainerReader::read(std::uint64_t index) {
    if (index >= header_.count)
        throw InvalidArgument("record index " + std::to_string(index) + " out of range (" +
                              std::to_string(header_.count) + " records)");
    const std::size_t rb = record_bytes(header_.samples_per_record);
    const std::uint64_t offset = kContainerHeaderBytes + index * rb;
    std::vector<unsigned char> buf(rb);
    in_.seekg(static_cast<std::streamoff>(offset));
    in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(rb));
    if (static_cast<std::size_t>(in_.gcount()) != rb) throw ParseError("truncated record", offset + in_.gcount());
    return decode_record(buf.data(), header_.samples_per_record, offset);
}

void save_container(std::span<const IQRecord> records, const std::filesystem::path& path,
                    std::uint32_t samples_per_record) {
    if (samples_per_record == 0 && !records.empty())
        samples_per_record = static_cast<std::uint32_t>(records.front().samples.size());
    ContainerWriter w(path, samples_per_record);
    for (const auto& r : records) w.write(r);
    w.finish();
}

std::vector<IQRecord> load_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto hdr = decode_header(bytes.data(), bytes.size());
    const std::size_t rb = record_bytes(hdr.samples_per_record);
    std::vector<IQRecord> out;
    out.reserve(hdr.count);
    std::uint64_t offset = kContainerHeaderBytes;
    for (std::uint64_t i = 0; i < hdr.count; ++i) {
        if (offset + rb > bytes.size())
            throw ParseError("truncated container: record " + std::to_string(i) + " incomplete", bytes.size());
        out.push_back(decode_record(bytes.data() + offset, hdr.samples_per_record, offset));
        offset += rb;
    }
    if (offset != bytes.size()) throw ParseError("trailing bytes after last record", offset);
    return out;
}

ContainerHeader read_container_header(const std::filesystem::path& path) {
    return ContainerReader(path).header();
}

std::string file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::uint64_t h = fnv1a({});
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        h = fnv1a(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
    }
    return hex64(h);
}

// --------------------------------------------------------------- generation

void GenerationConfig::validate() const {
    if (signals_per_cell < 1) throw InvalidArgument("signals_per_cell must be at least 1");
    if (n_samples < 8) throw InvalidArgument("n_samples must be at least 8");
    if (snr_db.empty() || modulations.empty() || channels.empty())
        throw InvalidArgument("snr grid, modulation list and channel list must be non-empty");
    for (auto k : channels)
        if (k == ChannelKind::UnknownUpstream) throw InvalidArgument("cannot generate unknown-upstream channels");
    if (!(rician_k > 0.0)) throw InvalidArgument("rician k must be positive");
    if (!(nakagami_m >= 0.5)) throw InvalidArgument("nakagami m must be at least 0.5");
    shaping.validate();
}

std::string GenerationConfig::canonical() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "format=" << kContainerVersion << ";signals_per_cell=" << signals_per_cell << ";n_samples=" << n_samples
       << ";snr_db=" << join_ints(snr_db) << ";modulations=";
    for (std::size_t i = 0; i < modulations.size(); ++i) os << (i ? "," : "") << dsp::variant_name(modulations[i]);
    os << ";channels=";
    for (std::size_t i = 0; i < channels.size(); ++i) os << (i ? "," : "") << channel::kind_name(channels[i]);
    os << ";master_seed=" << master_seed << ";oversampling=" << shaping.oversampling << ";rolloff=" << shaping.rolloff
       << ";span=" << shaping.span << ";rician_k=" << rician_k << ";nakagami_m=" << nakagami_m;
    return os.str();
}

std::uint64_t GenerationConfig::hash() const { return fnv1a(canonical()); }

GenerationConfig GenerationConfig::paper_scale(std::uint64_t seed) {
    GenerationConfig c;
    c.master_seed = seed;
    return c;
}

GenerationConfig GenerationConfig::desk_scale(std::uint64_t seed) {
    GenerationConfig c;
    c.signals_per_cell = 2;
    c.master_seed = seed;
    return c;
}

std::vector<RecordPlan> plan_dataset(const GenerationConfig& config) {
    config.validate();
    const std::size_t per_block = config.signals_per_cell * config.channels.size();
    std::vector<RecordPlan> plan;
    plan.reserve(config.modulations.size() * config.snr_db.size() * per_block);
    std::uint64_t index = 0;
    for (auto mod : config.modulations) {
        for (int snr : config.snr_db) {
            for (std::size_t j = 0; j < per_block; ++j, ++index) {
                const auto kind = config.channels[j % config.channels.size()];
                const std::size_t rep = j / config.channels.size();
                const unsigned taps = channel::is_fading(kind) ? (rep % 2 == 0 ? 4u : 6u) : 1u;
                plan.push_back({index,
                                {static_cast<std::uint16_t>(mod), static_cast<std::int16_t>(snr), kind},
                                taps,
                                derive_seed(config.master_seed, index)});
            }
        }
    }
    return plan;
}

IQRecord synthesize_record(Variant variant, int snr_db, ChannelKind kind, unsigned n_taps, std::size_t n_samples,
                           std::uint64_t seed, const dsp::ShapingConfig& shaping) {
    return synthesize_record(RecordPlan{0,
                                        {static_cast<std::uint16_t>(variant), static_cast<std::int16_t>(snr_db), kind},
                                        n_taps,
                                        seed},
                             [&] {
                                 GenerationConfig c;
                                 c.n_samples = n_samples;
                                 c.shaping = shaping;
                                 return c;
                             }());
}

IQRecord synthesize_record(const RecordPlan& plan, const GenerationConfig& config) {
    const auto variant = static_cast<Variant>(plan.cell.modulation);
    auto clean = dsp::synthesize(variant, config.n_samples, plan.seed, config.shaping);

    channel::ChannelSpec cs;
    cs.kind = plan.cell.channel;
    cs.rician_k = config.rician_k;
    cs.nakagami_m = config.nakagami_m;
    cs.n_taps = plan.n_taps;
    cs.seed = derive_seed(plan.seed, Stream::Channel);
    const auto ch = channel::draw_channel(cs);
    auto faded = channel::apply_channel(clean, ch);
    auto noisy = channel::add_awgn(faded, plan.cell.snr_db, derive_seed(plan.seed, Stream::Noise));

    IQRecord r;
    r.modulation = plan.cell.modulation;
    r.family = static_cast<std::uint8_t>(dsp::family_of(variant));
    r.channel = plan.cell.channel;
    r.snr_db = plan.cell.snr_db;
    r.seed = plan.seed;
    r.samples.resize(noisy.size());
    for (std::size_t i = 0; i < noisy.size(); ++i)
        r.samples[i] = {static_cast<float>(noisy.samples[i].real()), static_cast<float>(noisy.samples[i].imag())};
    return r;
}

DatasetManifest generate_dataset(const GenerationConfig& config, RecordSink& sink,
                                 const std::function<void(std::uint64_t, std::uint64_t)>& progress) {
    const auto plan = plan_dataset(config);
    DatasetManifest m;
    m.record_count = plan.size();
    m.samples_per_record = static_cast<std::uint32_t>(config.n_samples);
    m.master_seed = config.master_seed;
    m.config_hash = config.hash();
    m.properties["config"] = config.canonical();
    m.properties["static_channel"] = "flat single tap, unit magnitude, uniform phase";
    m.properties["snr_reference"] = "post-channel received power";
    m.properties["tap_spacing"] = "one sample per tap";
    m.record_cells.reserve(plan.size());
    for (const auto& p : plan) m.record_cells.push_back(p.cell);
    m.cells = census(m.record_cells);

    // Records are synthesized in parallel chunks and written in index order.
    const unsigned threads = std::max(1u, config.threads);
    const std::size_t chunk = 64 * threads;
    std::vector<IQRecord> slot(chunk);
    for (std::size_t base = 0; base < plan.size(); base += chunk) {
        const std::size_t n = std::min(chunk, plan.size() - base);
        auto work = [&](unsigned t) {
            for (std::size_t i = t; i < n; i += threads) slot[i] = synthesize_record(plan[base + i], config);
        };
        if (threads == 1) {
            work(0);
        } else {
            std::vector<std::exception_ptr> errors(threads);
            {
                std::vector<std::jthread> pool;
                for (unsigned t = 0; t < threads; ++t)
                    pool.emplace_back([&, t] {
                        try {
                            work(t);
                        } catch (...) {
                            errors[t] = std::current_exception();
                        }
                    });
            }
            for (auto& e : errors)
                if (e) std::rethrow_exception(e);
        }
        for (std::size_t i = 0; i < n; ++i) sink.write(slot[i]);
        if (progress) progress(base + n, plan.size());
    }
    return m;
}

DatasetManifest manifest_from_records(std::span<const IQRecord> records, std::uint64_t master_seed) {
    DatasetManifest m;
    m.record_count = records.size();
    m.samples_per_record = records.empty() ? 0 : static_cast<std::uint32_t>(records.front().samples.size());
    m.master_seed = master_seed;
    m.record_cells.reserve(records.size());
    for (const auto& r : records) m.record_cells.push_back(cell_of(r));
    m.cells = census(m.record_cells);
    return m;
}

std::filesystem::path manifest_path(const std::filesystem::path& container) {
    auto p = container;
    p += ".manifest";
    return p;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "format=HisarIQ\n";
    out << "record_count=" << m.record_count << "\n";
    out << "samples_per_record=" << m.samples_per_record << "\n";
    out << "master_seed=" << m.master_seed << "\n";
    out << "config_hash=" << hex64(m.config_hash) << "\n";
    for (const auto& [k, v] : m.properties) out << "property." << k << "=" << v << "\n";
    for (const auto& [cell, count] : m.cells)
        out << "cell." << modulation_name(cell.modulation) << "." << cell.snr_db << "."
            << channel::kind_name(cell.channel) << "=" << count << "\n";
    if (!out) throw IoError("write failed on '" + path.string() + "'");
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    DatasetManifest m;
    std::string line;
    std::uint64_t offset = 0;
    while (std::getline(in, line)) {
        const std::uint64_t line_offset = offset;
        offset += line.size() + 1;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("manifest line without '='", line_offset);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        try {
            if (key == "format") {
                if (val != "HisarIQ") throw ParseError("unexpected manifest format '" + val + "'", line_offset);
            } else if (key == "record_count") {
                m.record_count = std::stoull(val);
            } else if (key == "samples_per_record") {
                m.samples_per_record = static_cast<std::uint32_t>(std::stoul(val));
            } else if (key == "master_seed") {
                m.master_seed = std::stoull(val);
            } else if (key == "config_hash") {
                m.config_hash = std::stoull(val, nullptr, 16);
            } else if (key.starts_with("property.")) {
                m.properties[key.substr(9)] = val;
            } else if (key.starts_with("cell.")) {
                // cell.<modulation>.<snr>.<channel>; modulation names contain no dots.
                const std::string rest = key.substr(5);
                const auto d1 = rest.find('.');
                const auto d2 = rest.find('.', d1 + 1);
                if (d1 == std::string::npos || d2 == std::string::npos)
                    throw ParseError("malformed cell key '" + key + "'", line_offset);
                CellKey c{modulation_id(rest.substr(0, d1)),
                          static_cast<std::int16_t>(std::stoi(rest.substr(d1 + 1, d2 - d1 - 1))),
                          channel::parse_kind(rest.substr(d2 + 1))};
                m.cells[c] = std::stoull(val);
            }
        } catch (const std::logic_error& e) {
            throw ParseError("bad manifest value for '" + key + "': " + e.what(), line_offset);
        }
    }
    return m;
}

// ------------------------------------------------------------------- splits

SplitSets split_dataset(std::span<const CellKey> record_cells, std::array<double, 3> ratios, std::uint64_t seed) {
    double total = 0.0;
    for (double r : ratios) {
        if (!(r >= 0.0)) throw InvalidArgument("split ratios must be non-negative");
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("split ratios must sum to 1");

    std::map<CellKey, std::vector<std::uint64_t>> by_cell;
    for (std::uint64_t i = 0; i < record_cells.size(); ++i) by_cell[record_cells[i]].push_back(i);

    std::array<std::vector<std::uint64_t>, 3> out;
    std::array<double, 3> assigned{};
    double seen = 0.0;
    for (auto& [cell, ids] : by_cell) {
        const std::uint64_t cell_hash =
            (static_cast<std::uint64_t>(cell.modulation) << 32) ^
            (static_cast<std::uint64_t>(static_cast<std::uint16_t>(cell.snr_db)) << 8) ^
            static_cast<std::uint64_t>(cell.channel);
        auto eng = make_engine(derive_seed(derive_seed(seed, Stream::Split), cell_hash));
        std::shuffle(ids.begin(), ids.end(), eng);

        const double n = static_cast<double>(ids.size());
        seen += n;
        std::array<std::size_t, 3> count{};
        std::size_t placed = 0;
        for (int s = 0; s < 3; ++s) {
            count[s] = static_cast<std::size_t>(std::floor(n * ratios[s] + 1e-9));
            placed += count[s];
        }
        // At most one leftover per split, to the split furthest below target.
        std::array<bool, 3> bumped{};
        while (placed < ids.size()) {
            int best = -1;
            double best_deficit = -std::numeric_limits<double>::infinity();
            for (int s = 0; s < 3; ++s) {
                if (bumped[s] || ratios[s] == 0.0) continue;
                const double deficit = seen * ratios[s] - (assigned[s] + count[s]);
                if (deficit > best_deficit + 1e-12) {
                    best_deficit = deficit;
                    best = s;
                }
            }
            ++count[best];
            bumped[best] = true;
            ++placed;
        }
        std::size_t pos = 0;
        for (int s = 0; s < 3; ++s) {
            out[s].insert(out[s].end(), ids.begin() + pos, ids.begin() + pos + count[s]);
            pos += count[s];
            assigned[s] += count[s];
        }
    }
    for (int s = 0; s < 3; ++s) {
        if (ratios[s] > 0.0 && out[s].empty())
            throw StratificationError("cannot stratify " + std::to_string(record_cells.size()) +
                                      " records: split " + std::to_string(s) + " with ratio " +
                                      std::to_string(ratios[s]) + " would be empty");
        std::sort(out[s].begin(), out[s].end());
    }
    return {std::move(out[0]), std::move(out[1]), std::move(out[2])};
}

std::filesystem::path split_path(const std::filesystem::path& container, std::string_view which) {
    auto p = container;
    p += ".";
    p += std::string(which);
    p += ".idx";
    return p;
}

void write_split_files(const SplitSets& s, const std::filesystem::path& container) {
    auto write_one = [&](std::string_view name, const std::vector<std::uint64_t>& ids) {
        const auto p = split_path(container, name);
        std::ofstream out(p, std::ios::trunc);
        if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
        for (auto id : ids) out << id << "\n";
        if (!out) throw IoError("write failed on '" + p.string() + "'");
    };
    write_one("train", s.train);
    write_one("val", s.val);
    write_one("test", s.test);
}

bool has_split_files(const std::filesystem::path& container) {
    return std::filesystem::exists(split_path(container, "train")) &&
           std::filesystem::exists(split_path(container, "val")) &&
           std::filesystem::exists(split_path(container, "test"));
}

SplitSets read_split_files(const std::filesystem::path& container) {
    auto read_one = [&](std::string_view name) {
        const auto p = split_path(container, name);
        std::ifstream in(p);
        if (!in) throw IoError("cannot open '" + p.string() + "'");
        std::vector<std::uint64_t> ids;
        std::string line;
        std::uint64_t offset = 0;
        while (std::getline(in, line)) {
            if (!line.empty()) {
                try {
                    ids.push_back(std::stoull(line));
                } catch (const std::logic_error&) {
                    throw ParseError("bad record index '" + line + "' in " + p.string(), offset);
                }
            }
            offset += line.size() + 1;
        }
        return ids;
    };
    return {read_one("train"), read_one("val"), read_one("test")};
}

}  // namespace amc::data
