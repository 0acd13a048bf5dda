#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace hawkesmix {

// One observed event. Types are 0-based in memory; the file formats use
// 1-based type codes and the loaders translate at the boundary.
struct Event {
    double time = 0.0;
    int type = 0;
};

// Ordered events on a finite horizon [0, horizon]. Ties in time are legal and
// keep their input order; every downstream sum over pairs uses strict index
// order j < i, never a time comparison.
struct EventSequence {
    std::string id;
    double horizon = 0.0;
    std::vector<Event> events;
};

struct Corpus {
    int num_types = 0;
    bool types_declared = false;  // C came from a header record, not inference
    std::vector<EventSequence> sequences;

    std::size_t size() const { return sequences.size(); }
    std::size_t total_events() const;
    double max_horizon() const;
};

enum class CorpusFormat { Jsonl, Csv };

// Throws invalid_input naming the sequence and the violated rule.
void validate_sequence(const EventSequence& seq, int num_types);
// Validates every sequence plus corpus-level rules (unique ids, type range).
void validate_corpus(const Corpus& corpus);

// Format chosen by extension: .csv is CSV, anything else JSONL.
Corpus load_corpus(const std::filesystem::path& file);
Corpus load_corpus(const std::filesystem::path& file, CorpusFormat format);
void save_corpus(const Corpus& corpus, const std::filesystem::path& file);
void save_corpus(const Corpus& corpus, const std::filesystem::path& file, CorpusFormat format);

// CSV corpora carry horizons in a sidecar table next to the event table.
std::filesystem::path csv_sidecar_path(const std::filesystem::path& file);

// Labels live in a small JSON document {"ids": [...], "labels": [...]}; a fit
// report (which stores its labels under "labels") is accepted too.
std::vector<int> load_labels(const std::filesystem::path& file);
void save_labels(const Corpus& corpus, const std::vector<int>& labels,
                 const std::filesystem::path& file);

}  // namespace hawkesmix
