#include "hawkesmix/event_data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hawkesmix/common.hpp"

namespace hawkesmix {

using nlohmann::json;

std::size_t Corpus::total_events() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.events.size();
    return n;
}

double Corpus::max_horizon() const {
    double t = 0.0;
    for (const auto& s : sequences) t = std::max(t, s.horizon);
    return t;
}

void validate_sequence(const EventSequence& seq, int num_types) {
    auto fail = [&](const std::string& why) {
        throw invalid_input("sequence '" + seq.id + "': " + why);
    };
    if (!std::isfinite(seq.horizon) || seq.horizon < 0.0) fail("horizon must be finite and >= 0");
    double prev = 0.0;
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        const Event& e = seq.events[i];
        if (!std::isfinite(e.time)) fail("event " + std::to_string(i) + " has non-finite time");
        if (e.time < 0.0) fail("event " + std::to_string(i) + " has negative time");
        if (e.time > seq.horizon) fail("event " + std::to_string(i) + " lies past the horizon");
        if (e.time < prev) fail("event times decrease at index " + std::to_string(i));
        prev = e.time;
        if (e.type < 0 || e.type >= num_types) {
            fail("event " + std::to_string(i) + " has type " + std::to_string(e.type + 1) +
                 " outside 1.." + std::to_string(num_types));
        }
    }
}

void validate_corpus(const Corpus& corpus) {
    if (corpus.num_types < 0) throw invalid_input("corpus: negative type count");
    std::unordered_set<std::string> seen;
    for (const auto& s : corpus.sequences) {
        if (!seen.insert(s.id).second) throw invalid_input("corpus: duplicate sequence id '" + s.id + "'");
        validate_sequence(s, corpus.num_types);
    }
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Corpus load_jsonl(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw invalid_input("cannot open corpus file: " + file.string());
    Corpus corpus;
    int declared_c = 0;
    int inferred_c = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw invalid_input(file.string() + " line " + std::to_string(lineno) +
                                ": JSON parse error: " + e.what());
        }
        auto fail = [&](const std::string& why) {
            throw invalid_input(file.string() + " line " + std::to_string(lineno) + ": " + why);
        };
        if (rec.contains("meta")) {
            if (lineno != 1) fail("meta record allowed only on the first line");
            const auto& meta = rec["meta"];
            if (!meta.is_object() || !meta.contains("C") || !meta["C"].is_number_integer())
                fail("meta record must carry an integer C");
            declared_c = meta["C"].get<int>();
            if (declared_c < 1) fail("declared C must be >= 1");
            continue;
        }
        if (!rec.is_object()) fail("expected an object per line");
        if (!rec.contains("id") || !rec["id"].is_string()) fail("missing string field 'id'");
        if (!rec.contains("T") || !rec["T"].is_number()) fail("missing numeric field 'T'");
        if (!rec.contains("events") || !rec["events"].is_array()) fail("missing array field 'events'");
        EventSequence seq;
        seq.id = rec["id"].get<std::string>();
        seq.horizon = rec["T"].get<double>();
        for (const auto& ev : rec["events"]) {
            if (!ev.is_array() || ev.size() != 2 || !ev[0].is_number() || !ev[1].is_number_integer())
                fail("each event must be a [time, integer type] pair");
            seq.events.push_back({ev[0].get<double>(), ev[1].get<int>() - 1});
            inferred_c = std::max(inferred_c, ev[1].get<int>());
        }
        corpus.sequences.push_back(std::move(seq));
    }
    corpus.types_declared = declared_c > 0;
    corpus.num_types = corpus.types_declared ? declared_c : inferred_c;
    validate_corpus(corpus);
    return corpus;
}

void save_jsonl(const Corpus& corpus, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw invalid_input("cannot write corpus file: " + file.string());
    json meta = {{"meta", {{"C", corpus.num_types}}}};
    out << meta.dump() << '\n';
    for (const auto& s : corpus.sequences) {
        json events = json::array();
        for (const auto& e : s.events) events.push_back({e.time, e.type + 1});
        json rec = {{"id", s.id}, {"T", s.horizon}, {"events", std::move(events)}};
        out << rec.dump() << '\n';
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
}

Corpus load_csv(const std::filesystem::path& file) {
    const auto side = csv_sidecar_path(file);
    std::ifstream hin(side);
    if (!hin) throw invalid_input("cannot open horizon sidecar: " + side.string());

    // Sidecar rows fix the sequence order and horizons; the event table may
    // then only reference declared ids.
    Corpus corpus;
    std::unordered_map<std::string, std::size_t> index;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(hin, line)) {
        ++lineno;
        if (line.empty() || line == "id,T" || line.starts_with("id,")) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 2)
            throw invalid_input(side.string() + " line " + std::to_string(lineno) + ": expected id,T");
        EventSequence seq;
        seq.id = cells[0];
        try {
            seq.horizon = std::stod(cells[1]);
        } catch (const std::exception&) {
            throw invalid_input(side.string() + " line " + std::to_string(lineno) + ": bad horizon");
        }
        if (index.contains(seq.id))
            throw invalid_input(side.string() + ": duplicate sequence id '" + seq.id + "'");
        index[seq.id] = corpus.sequences.size();
        corpus.sequences.push_back(std::move(seq));
    }

    std::ifstream in(file);
    if (!in) throw invalid_input("cannot open corpus file: " + file.string());
    int inferred_c = 0;
    lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "id,t,c" || line.starts_with("id,")) continue;
        auto cells = split_csv_line(line);
        auto fail = [&](const std::string& why) {
            throw invalid_input(file.string() + " line " + std::to_string(lineno) + ": " + why);
        };
        if (cells.size() != 3) fail("expected id,t,c");
        auto it = index.find(cells[0]);
        if (it == index.end()) fail("id '" + cells[0] + "' missing from the horizon sidecar");
        double t = 0.0;
        int c = 0;
        try {
            t = std::stod(cells[1]);
            std::size_t pos = 0;
            c = std::stoi(cells[2], &pos);
            if (pos != cells[2].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            fail("bad numeric cell");
        }
        corpus.sequences[it->second].events.push_back({t, c - 1});
        inferred_c = std::max(inferred_c, c);
    }
    corpus.num_types = inferred_c;
    corpus.types_declared = false;
    validate_corpus(corpus);
    return corpus;
}

void save_csv(const Corpus& corpus, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw invalid_input("cannot write corpus file: " + file.string());
    out << "id,t,c\n";
    for (const auto& s : corpus.sequences)
        for (const auto& e : s.events)
            out << s.id << ',' << format_double(e.time) << ',' << e.type + 1 << '\n';
    const auto side = csv_sidecar_path(file);
    std::ofstream hout(side);
    if (!hout) throw invalid_input("cannot write horizon sidecar: " + side.string());
    hout << "id,T\n";
    for (const auto& s : corpus.sequences) hout << s.id << ',' << format_double(s.horizon) << '\n';
}

}  // namespace

std::filesystem::path csv_sidecar_path(const std::filesystem::path& file) {
    auto p = file;
    p += ".horizons";
    return p;
}

Corpus load_corpus(const std::filesystem::path& file) {
    return load_corpus(file, file.extension() == ".csv" ? CorpusFormat::Csv : CorpusFormat::Jsonl);
}

Corpus load_corpus(const std::filesystem::path& file, CorpusFormat format) {
    return format == CorpusFormat::Csv ? load_csv(file) : load_jsonl(file);
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& file) {
    save_corpus(corpus, file, file.extension() == ".csv" ? CorpusFormat::Csv : CorpusFormat::Jsonl);
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& file, CorpusFormat format) {
    validate_corpus(corpus);
    if (format == CorpusFormat::Csv)
        save_csv(corpus, file);
    else
        save_jsonl(corpus, file);
}

std::vector<int> load_labels(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw invalid_input("cannot open labels file: " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw invalid_input(file.string() + ": JSON parse error: " + e.what());
    }
    if (!doc.contains("labels") || !doc["labels"].is_array())
        throw invalid_input(file.string() + ": missing array field 'labels'");
    std::vector<int> labels;
    for (const auto& v : doc["labels"]) {
        if (!v.is_number_integer()) throw invalid_input(file.string() + ": labels must be integers");
        labels.push_back(v.get<int>());
    }
    return labels;
}

void save_labels(const Corpus& corpus, const std::vector<int>& labels,
                 const std::filesystem::path& file) {
    if (labels.size() != corpus.size())
        throw invalid_input("labels/corpus size mismatch: " + std::to_string(labels.size()) +
                            " vs " + std::to_string(corpus.size()));
    json ids = json::array();
    for (const auto& s : corpus.sequences) ids.push_back(s.id);
    json doc = {{"ids", std::move(ids)}, {"labels", labels}};
    std::ofstream out(file);
    if (!out) throw invalid_input("cannot write labels file: " + file.string());
    out << doc.dump(2) << '\n';
}

}  // namespace hawkesmix
