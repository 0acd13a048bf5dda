#include "hawkesmix/cache.hpp"

#include "hawkesmix/parallel.hpp"

namespace hawkesmix {

CorpusCache::CorpusCache(const Corpus& corpus, const BasisSet& basis)
    : num_types(corpus.num_types), num_basis(basis.count) {
    seq.resize(corpus.size());
    const int d_count = basis.count;
    parallel_for(corpus.size(), [&](std::size_t n) {
        const EventSequence& s = corpus.sequences[n];
        SequenceCache& sc = seq[n];
        const std::size_t m = s.events.size();
        sc.num_events = static_cast<int>(m);
        sc.pair_g.resize(d_count * (m * (m - 1) / 2));
        sc.end_mass.resize(m * d_count);
        sc.type_mass.assign(static_cast<std::size_t>(num_types) * d_count, 0.0);
        std::size_t off = 0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                const double lag = s.events[i].time - s.events[j].time;
                for (int d = 0; d < d_count; ++d) sc.pair_g[off++] = basis.value(d, lag);
            }
            const double remain = s.horizon - s.events[i].time;
            for (int d = 0; d < d_count; ++d) {
                const double mass = basis.integral(d, remain);
                sc.end_mass[i * d_count + d] = mass;
                sc.type_mass[static_cast<std::size_t>(s.events[i].type) * d_count + d] += mass;
            }
        }
    });
}

}  // namespace hawkesmix
