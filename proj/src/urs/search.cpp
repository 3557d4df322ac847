#include "nrm/urs/search.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <thread>

#include "nrm/errors.hpp"

namespace nrm::urs {

namespace {

// Runs fn(i) for i in [0, n) over `jobs` threads with contiguous chunks.
template <typename Fn> void parallel_for(std::size_t n, unsigned jobs, Fn &&fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n ? n : 1)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::vector<std::thread> workers;
  const std::size_t chunk = (n + jobs - 1) / jobs;
  for (unsigned w = 0; w < jobs; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    workers.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i)
        fn(i);
    });
  }
  for (auto &t : workers)
    t.join();
}

bool next_lexicographic(std::vector<SymbolId> &image, std::size_t num_symbols) {
  for (std::size_t i = image.size(); i-- > 0;) {
    if (++image[i] < num_symbols)
      return true;
    image[i] = 0;
  }
  return false;
}

void check_map(const MooreMachine &m, const SymbolMap &alpha) {
  if (alpha.size() != m.num_symbols())
    throw InputError("symbol map is not total on the alphabet");
  for (SymbolId p : alpha.image)
    if (p >= m.num_symbols())
      throw InputError("symbol map image out of range");
}

} // namespace

void for_each_map(std::size_t num_symbols, const std::function<bool(const SymbolMap &)> &fn) {
  if (num_symbols == 0)
    throw InputError("alphabet must not be empty");
  const SymbolMap identity = SymbolMap::identity(num_symbols);
  if (!fn(identity))
    return;
  SymbolMap alpha{std::vector<SymbolId>(num_symbols, 0)};
  do {
    if (alpha != identity && !fn(alpha))
      return;
  } while (next_lexicographic(alpha.image, num_symbols));
}

std::vector<SymbolMap> enumerate_maps(std::size_t num_symbols) {
  std::vector<SymbolMap> out;
  for_each_map(num_symbols, [&](const SymbolMap &a) {
    out.push_back(a);
    return true;
  });
  return out;
}

bool is_working(const MooreMachine &m, const SymbolMap &alpha,
                const std::vector<std::vector<SymbolId>> &dataset) {
  check_map(m, alpha);
  for (const auto &x : dataset) {
    std::vector<SymbolId> ax;
    ax.reserve(x.size());
    for (SymbolId p : x)
      ax.push_back(alpha.image.at(p));
    if (automata::run_string(m, x).outputs != automata::run_string(m, ax).outputs)
      return false;
  }
  return true;
}

namespace {

// Per-thread scratch space; the mark arrays are all-zero between candidates.
struct Workspace {
  explicit Workspace(const MooreMachine &m)
      : nq(m.num_states()), np(m.num_symbols()), absorbing(nq), visited(nq * nq, 0),
        in_next(nq * nq, 0) {
    for (StateId q = 0; q < nq; ++q)
      absorbing[q] = automata::is_absorbing(m, q);
  }

  std::size_t nq, np;
  std::vector<char> absorbing;
  std::vector<char> visited;
  std::vector<char> in_next;
  std::vector<std::size_t> touched;
  CandidateDataset frontier, next;
};

CandidateResult run_candidate(const MooreMachine &m, SymbolMap map,
                              const SearchOptions &options, Workspace &ws,
                              CandidateDataset *last_frontier) {
  const std::size_t nq = ws.nq, np = ws.np;
  CandidateResult result{std::move(map), false, 0, 0};
  const SymbolMap &alpha = result.alpha;
  auto &frontier = ws.frontier;
  auto &next = ws.next;
  frontier.pairs.clear();
  frontier.strings.clear();

  auto visit = [&](std::size_t key) {
    ws.visited[key] = 1;
    ws.touched.push_back(key);
  };
  auto finish = [&](bool survived) {
    for (std::size_t key : ws.touched)
      ws.visited[key] = 0;
    ws.touched.clear();
    result.survived = survived;
    if (last_frontier)
      *last_frontier = frontier;
    return std::move(result);
  };

  // D[alpha] starts as every string of length one.
  const StateId q0 = m.initial();
  visit(q0 * nq + q0);
  for (SymbolId p = 0; p < np; ++p) {
    StateId a = m.next(q0, p), b = m.next(q0, alpha.image[p]);
    char &mark = ws.in_next[a * nq + b];
    if (mark)
      continue;
    mark = 1;
    frontier.pairs.emplace_back(a, b);
    if (options.keep_strings)
      frontier.strings.push_back({p});
  }
  for (auto [a, b] : frontier.pairs) {
    ws.in_next[a * nq + b] = 0;
    if (!ws.visited[a * nq + b])
      visit(a * nq + b);
  }

  // Each iteration adds at least one unexplored pair when deduping, so the
  // product-space size bounds the loop.
  const std::size_t max_iterations = nq * nq + 1;
  for (;;) {
    if (++result.iterations > max_iterations) {
      finish(false);
      throw std::logic_error("URS search exceeded its iteration bound");
    }
    result.peak_dataset = std::max(result.peak_dataset, frontier.pairs.size());

    for (auto [a, b] : frontier.pairs)
      if (m.output(a) != m.output(b))
        return finish(false);

    next.pairs.clear();
    next.strings.clear();
    for (std::size_t i = 0; i < frontier.pairs.size(); ++i) {
      auto [a, b] = frontier.pairs[i];
      if (options.absorbing_skip && ws.absorbing[a] && ws.absorbing[b])
        continue;
      for (SymbolId p = 0; p < np; ++p) {
        StateId na = m.next(a, p), nb = m.next(b, alpha.image[p]);
        if (options.self_loop_skip && na == a && nb == b)
          continue;
        const std::size_t key = na * nq + nb;
        if ((options.dedupe_visited && ws.visited[key]) || ws.in_next[key])
          continue;
        ws.in_next[key] = 1;
        next.pairs.emplace_back(na, nb);
        if (options.keep_strings) {
          next.strings.push_back(frontier.strings[i]);
          next.strings.back().push_back(p);
        }
      }
    }
    for (auto [a, b] : next.pairs) {
      const std::size_t key = a * nq + b;
      ws.in_next[key] = 0;
      if (!ws.visited[key])
        visit(key);
    }
    if (next.pairs.empty())
      return finish(true);
    std::swap(frontier, next);
  }
}

} // namespace

CandidateResult check_candidate(const MooreMachine &m, const SymbolMap &alpha,
                                const SearchOptions &options,
                                CandidateDataset *last_frontier) {
  check_map(m, alpha);
  Workspace ws(m);
  return run_candidate(m, alpha, options, ws, last_frontier);
}

UrsReport find_urs(const MooreMachine &m, const SearchOptions &options) {
  const auto start = std::chrono::steady_clock::now();
  UrsReport report;
  const std::size_t np = m.num_symbols();
  std::size_t total = 1;
  for (std::size_t i = 0; i < np; ++i)
    total *= np;
  report.candidates.resize(total);
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, total));
  const std::size_t chunk = (total + jobs - 1) / jobs;
  // Candidate i is the i-th map of enumerate_maps: index 0 is the identity,
  // the rest follow base-|P| counting with the identity's own slot skipped.
  std::size_t identity_rank = 0;
  for (std::size_t i = 0; i < np; ++i)
    identity_rank = identity_rank * np + i;
  parallel_for(jobs, jobs, [&](std::size_t w) {
    Workspace ws(m);
    const std::size_t lo = w * chunk, hi = std::min(total, lo + chunk);
    for (std::size_t i = lo; i < hi; ++i) {
      SymbolMap alpha{std::vector<SymbolId>(np)};
      std::size_t rank = i == 0 ? identity_rank : (i <= identity_rank ? i - 1 : i);
      for (std::size_t k = np; k-- > 0; rank /= np)
        alpha.image[k] = rank % np;
      report.candidates[i] = run_candidate(m, std::move(alpha), options, ws, nullptr);
    }
  });
  for (const auto &c : report.candidates) {
    if (c.survived)
      report.surviving.push_back(c.alpha);
    report.max_iterations = std::max(report.max_iterations, c.iterations);
    report.peak_dataset = std::max(report.peak_dataset, c.peak_dataset);
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<SymbolMap> urs_oracle_exact(const MooreMachine &m, unsigned jobs) {
  std::vector<SymbolMap> maps = enumerate_maps(m.num_symbols());
  std::vector<char> keep(maps.size(), 0);
  parallel_for(maps.size(), jobs, [&](std::size_t i) {
    keep[i] = automata::equivalent(m, automata::relabel(m, maps[i]));
  });
  std::vector<SymbolMap> out;
  for (std::size_t i = 0; i < maps.size(); ++i)
    if (keep[i])
      out.push_back(std::move(maps[i]));
  return out;
}

bool works_up_to(const MooreMachine &m, const SymbolMap &alpha, std::size_t max_len) {
  check_map(m, alpha);
  const std::size_t nq = m.num_states();
  const std::size_t np = m.num_symbols();
  // layer[k] = state pairs reached by some string of length k
  std::vector<std::pair<StateId, StateId>> layer{{m.initial(), m.initial()}}, next;
  std::vector<char> mark(nq * nq, 0);
  bool ok = true;
  for (std::size_t len = 1; len <= max_len; ++len) {
    next.clear();
    for (auto [a, b] : layer)
      for (SymbolId p = 0; p < np; ++p) {
        StateId na = m.next(a, p), nb = m.next(b, alpha.image[p]);
        char &f = mark[na * nq + nb];
        if (!f) {
          f = 1;
          next.emplace_back(na, nb);
        }
      }
    for (auto [a, b] : next) {
      mark[a * nq + b] = 0;
      ok = ok && m.output(a) == m.output(b);
    }
    std::swap(layer, next);
  }
  return ok;
}

std::vector<SymbolMap> urs_oracle_bounded(const MooreMachine &m, std::size_t max_len,
                                          unsigned jobs) {
  std::vector<SymbolMap> maps = enumerate_maps(m.num_symbols());
  std::vector<char> keep(maps.size(), 0);
  parallel_for(maps.size(), jobs,
               [&](std::size_t i) { keep[i] = works_up_to(m, maps[i], max_len); });
  std::vector<SymbolMap> out;
  for (std::size_t i = 0; i < maps.size(); ++i)
    if (keep[i])
      out.push_back(std::move(maps[i]));
  return out;
}

} // namespace nrm::urs
