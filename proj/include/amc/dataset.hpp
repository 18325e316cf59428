#pragma once

// Dataset assembly: labeled I/Q records, the HisarIQ binary container, the
// key=value manifest sidecar, deterministic generation and stratified splits.

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "amc/channel.hpp"
#include "amc/modulation.hpp"

namespace amc::data {

using channel::ChannelKind;
using dsp::Family;
using dsp::Variant;

// Modulation ids 0..25 are the native variants (dsp::Variant values).
// Ids 100..109 are reserved for the ten classes of RadioML2016.10a, in the
// order listed by kRadioMLNames; converters must use these ids.
inline constexpr std::uint16_t kRadioMLBase = 100;
inline constexpr std::array<std::string_view, 10> kRadioMLNames{
    "AM-DSB", "WBFM", "GFSK", "CPFSK", "PAM4", "BPSK", "QPSK", "8PSK", "QAM16", "QAM64"};

bool is_native_id(std::uint16_t id);
bool is_radioml_id(std::uint16_t id);
std::string modulation_name(std::uint16_t id);
Family family_of_id(std::uint16_t id);
std::uint16_t modulation_id(std::string_view name);

/// family_of over variant names, as grouped in the native table.
Family family_of(std::string_view variant);

/// The 20-point SNR grid -20, -18, ..., 18 dB.
const std::vector<int>& snr_grid();

struct IQRecord {
    std::vector<std::complex<float>> samples;
    std::uint16_t modulation = 0;
    std::uint8_t family = 0;
    ChannelKind channel = ChannelKind::Ideal;
    std::int16_t snr_db = 0;
    std::uint64_t seed = 0;

    bool operator==(const IQRecord&) const = default;
};

struct CellKey {
    std::uint16_t modulation;
    std::int16_t snr_db;
    ChannelKind channel;

    auto operator<=>(const CellKey&) const = default;
};

CellKey cell_of(const IQRecord& r);

using Census = std::map<CellKey, std::size_t>;
Census census(std::span<const CellKey> keys);

// ---------------------------------------------------------------- container

inline constexpr std::array<char, 4> kContainerMagic{'H', 'I', 'Q', '1'};
inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 4 + 2 + 8 + 4;
inline constexpr std::size_t kRecordHeaderBytes = 2 + 1 + 1 + 2 + 2 + 8;

struct ContainerHeader {
    std::uint16_t version = kContainerVersion;
    std::uint64_t count = 0;
    std::uint32_t samples_per_record = 0;
};

class RecordSink {
public:
    virtual ~RecordSink() = default;
    virtual void write(const IQRecord& rec) = 0;
};

/// Streams records to disk; the record count in the header is patched on
/// finish() (also called by the destructor if needed).
class ContainerWriter : public RecordSink {
public:
    ContainerWriter(const std::filesystem::path& path, std::uint32_t samples_per_record);
    ~ContainerWriter() override;
    ContainerWriter(const ContainerWriter&) = delete;
    ContainerWriter& operator=(const ContainerWriter&) = delete;

    void write(const IQRecord& rec) override;
    void finish();
    std::uint64_t count() const { return count_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::uint32_t samples_per_record_;
    std::uint64_t count_ = 0;
    bool finished_ = false;
};

class VectorSink : public RecordSink {
public:
    void write(const IQRecord& rec) override { records.push_back(rec); }
    std::vector<IQRecord> records;
};

/// Random-access reader; records are fixed size so any index is one seek.
class ContainerReader {
public:
    explicit ContainerReader(const std::filesystem::path& path);

    const ContainerHeader& header() const { return header_; }
    std::uint64_t size() const { return header_.count; }
    IQRecord read(std::uint64_t index);

private:
    std::filesystem::path path_;
    std::ifstream in_;
    ContainerHeader header_;
};

void save_container(std::span<const IQRecord> records, const std::filesystem::path& path,
                    std::uint32_t samples_per_record = 0);
std::vector<IQRecord> load_container(const std::filesystem::path& path);
ContainerHeader read_container_header(const std::filesystem::path& path);

/// FNV-1a over the file bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

// --------------------------------------------------------------- generation

struct GenerationConfig {
    std::size_t signals_per_cell = 300;
    std::size_t n_samples = 1024;
    std::vector<int> snr_db = snr_grid();
    std::vector<Variant> modulations{dsp::all_variants().begin(), dsp::all_variants().end()};
    std::vector<ChannelKind> channels{channel::kSimulatedKinds.begin(), channel::kSimulatedKinds.end()};
    std::uint64_t master_seed = 0;
    dsp::ShapingConfig shaping{};
    double rician_k = 3.0;
    double nakagami_m = 2.0;
    unsigned threads = 1;

    void validate() const;
    /// Canonical text of every field that affects the generated bytes.
    std::string canonical() const;
    std::uint64_t hash() const;

    static GenerationConfig paper_scale(std::uint64_t seed);
    static GenerationConfig desk_scale(std::uint64_t seed);
};

struct RecordPlan {
    std::uint64_t index;
    CellKey cell;
    unsigned n_taps;
    std::uint64_t seed;
};

/// Record layout of a generation run, in file order. Within each
/// (modulation, snr) block channel kinds rotate round-robin and fading
/// records alternate 4 and 6 taps.
std::vector<RecordPlan> plan_dataset(const GenerationConfig& config);

IQRecord synthesize_record(const RecordPlan& plan, const GenerationConfig& config);

/// Same, for one explicitly chosen cell; used to build ad-hoc sets.
IQRecord synthesize_record(Variant variant, int snr_db, ChannelKind kind, unsigned n_taps, std::size_t n_samples,
                           std::uint64_t seed, const dsp::ShapingConfig& shaping = {});

struct DatasetManifest {
    std::uint64_t record_count = 0;
    std::uint32_t samples_per_record = 0;
    std::uint64_t master_seed = 0;
    std::uint64_t config_hash = 0;
    std::map<std::string, std::string> properties;  // free-form generation facts
    Census cells;
    std::vector<CellKey> record_cells;  // per record, file order; not serialized
};

DatasetManifest generate_dataset(const GenerationConfig& config, RecordSink& sink,
                                 const std::function<void(std::uint64_t done, std::uint64_t total)>& progress = {});

/// Manifest for records already in memory (e.g. a loaded container).
DatasetManifest manifest_from_records(std::span<const IQRecord> records, std::uint64_t master_seed);

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& container);

// ------------------------------------------------------------------- splits

struct SplitSets {
    std::vector<std::uint64_t> train;
    std::vector<std::uint64_t> val;
    std::vector<std::uint64_t> test;
};

inline constexpr std::array<double, 3> kPaperRatios{8.0 / 15.0, 2.0 / 15.0, 5.0 / 15.0};

/// Stratified by cell: every cell is split at the given ratios, rounding
/// leftovers toward whichever split is furthest below its global target, so
/// each cell is within one record of its share.
SplitSets split_dataset(std::span<const CellKey> record_cells, std::array<double, 3> ratios, std::uint64_t seed);

void write_split_files(const SplitSets& s, const std::filesystem::path& container);
SplitSets read_split_files(const std::filesystem::path& container);
bool has_split_files(const std::filesystem::path& container);
std::filesystem::path split_path(const std::filesystem::path& container, std::string_view which);

}  // namespace amc::data
