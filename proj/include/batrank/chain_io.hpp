#pragma once

// On-disk chain formats.
//
// Draws file: the line "BATRANK-DRAWS 1\n", a little-endian uint64 header
// length, a JSON header (configuration, dataset fingerprint, dimensions,
// labels), then one block of flat_size doubles per stored draw in
// ParamState::flatten order.
//
// Summary and checkpoint files are JSON.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "batrank/sampler.hpp"

namespace batrank {

class ChainIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Streams draws to disk. When resuming, the file is truncated to the first
// `keep_draws` draws and appended to.
class DrawWriter {
public:
    DrawWriter(const std::filesystem::path& path, const ChainOutput& meta);
    DrawWriter(const std::filesystem::path& path, const ChainOutput& meta, std::uint64_t keep_draws);

    void write(const ParamState& s);
    void flush();
    std::uint64_t count() const { return count_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::size_t flat_size_ = 0;
    std::uint64_t count_ = 0;
};

// Reads a draws file (and, if present, the sibling summary for acceptance
// rates). Throws ChainIoError.
ChainOutput read_chain(const std::filesystem::path& draws_path);

// Header fields only; draws left empty.
ChainOutput read_chain_header(const std::filesystem::path& draws_path);

std::string summary_json(const ChainOutput& out);
void write_summary(const std::filesystem::path& path, const ChainOutput& out);

// Written to a temporary file then renamed, so an interrupted write never
// leaves a truncated checkpoint.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Sibling file names for chain k inside an output directory.
std::filesystem::path draws_path(const std::filesystem::path& dir, std::size_t chain);
std::filesystem::path summary_path(const std::filesystem::path& draws);
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t chain);

std::string hex64(std::uint64_t v);

}  // namespace batrank
