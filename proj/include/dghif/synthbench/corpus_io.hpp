#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dghif/synthbench/generator.hpp"

namespace dghif::synth {

inline constexpr int kCorpusFormatVersion = 1;

/// Writes users.csv, posts.jsonl, interactions.tsv and vocab.txt into `dir`
/// (created when missing), then manifest.json with the config, seed, format
/// version and a hash of every file. The manifest goes last so that its
/// presence marks a complete corpus.
void write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus);

/// Reads a corpus written by write_corpus, checking the manifest version and
/// file hashes. DataError on any inconsistency.
SynthCorpus read_corpus(const std::filesystem::path& dir);

/// FNV-1a 64 of a file's bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace dghif::synth
