#include <cmath>
#include <limits>

#include "doctest.h"
#include "stream/common/errors.hpp"
#include "stream/scan/adjoint.hpp"
#include "stream/scan/scan.hpp"
#include "stream/verify/gradcheck.hpp"
#include "stream/verify/instances.hpp"

using namespace stream;
using namespace stream::scan;
using stream::verify::max_relative_error;

namespace {

double pair_distance(const ScanPair& x, const ScanPair& y) {
  double d = 0.0;
  for (std::size_t j = 0; j < x.a.size(); ++j) {
    d = std::max({d, std::abs(x.a[j] - y.a[j]), std::abs(x.b[j] - y.b[j])});
  }
  return d;
}

}  // namespace

TEST_CASE("identity pair is a two-sided identity") {
  CounterRng rng(1);
  const auto e = ScanPair::identity(4);
  for (int i = 0; i < 50; ++i) {
    const auto x = verify::random_pair(rng, 4);
    CHECK(combine(x, e) == x);
    CHECK(combine(e, x) == x);
  }
}

TEST_CASE("combine is associative") {
  CounterRng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto p = verify::random_pair(rng, 3);
    const auto q = verify::random_pair(rng, 3);
    const auto r = verify::random_pair(rng, 3);
    CHECK(pair_distance(combine(combine(p, q), r), combine(p, combine(q, r))) <= 1e-13);
  }
  CHECK_THROWS_AS(combine(ScanPair::identity(2), ScanPair::identity(3)), ContractError);
}

TEST_CASE("scan_sequential") {
  CounterRng rng(3);
  const auto single = verify::random_pairs(rng, 1, 3);
  CHECK(scan_sequential(single) == single);

  const auto a = verify::random_stable_a(rng, 4);
  const auto steps = verify::random_steps(rng, 1024, 4);
  const auto scanned = scan_sequential(make_leaves(a, steps));
  const auto states = ssm::run_states(a, steps, ssm::SisoState::zero(4));
  double worst = 0.0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    worst = std::max(worst, max_relative_error(scanned.b.row(k), states[k].h));
  }
  CHECK(worst < 1e-11);

  auto flat = verify::random_pairs(rng, 100, 2);
  for (auto& v : flat.a.data()) v = 1.0;
  const auto sums = scan_sequential(flat);
  for (std::size_t j = 0; j < 2; ++j) {
    std::complex<double> acc = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
      acc += flat.b.row(k)[j];
      CHECK(std::abs(sums.b.row(k)[j] - acc) < 1e-13);
    }
  }

  CHECK_THROWS_AS(scan_sequential(PairSequence{}), ContractError);
  auto bad = verify::random_pairs(rng, 10, 2);
  bad.b.row(6)[1] = std::numeric_limits<double>::infinity();
  try {
    scan_sequential(bad);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.index() == 6);
  }
}

TEST_CASE("scan_parallel agrees with scan_sequential") {
  CounterRng rng(4);
  const auto pairs = verify::random_pairs(rng, 1 << 17, 2);
  const auto reference = scan_sequential(pairs);
  CHECK(scan_parallel(pairs, 1) == reference);
  for (std::size_t w : {2u, 4u, 8u}) {
    const auto out = scan_parallel(pairs, w);
    CHECK(max_relative_error(out.b.data(), reference.b.data()) < 1e-9);
    CHECK(max_relative_error(out.a.data(), reference.a.data()) < 1e-9);
  }
  CHECK_THROWS_AS(scan_parallel(pairs, 0), ContractError);
}

TEST_CASE("scan_parallel handles ragged chunking") {
  CounterRng rng(5);
  for (std::size_t n : {1u, 2u, 3u, 7u, 9u, 33u}) {
    const auto pairs = verify::random_pairs(rng, n, 2);
    const auto reference = scan_sequential(pairs);
    for (std::size_t chunks : {1u, 2u, 3u, 4u, 8u, 16u}) {
      auto out = pairs;
      WorkerPool pool(1);
      scan_parallel_inplace(out, pool, chunks);
      CHECK(max_relative_error(out.b.data(), reference.b.data()) < 1e-13);
    }
  }
}

TEST_CASE("scan_parallel does at most twice the sequential combines") {
  CounterRng rng(6);
  const auto pairs = verify::random_pairs(rng, 10000, 1);
  ScanStats seq;
  scan_sequential(pairs, &seq);
  CHECK(seq.combines == 9999);
  for (std::size_t chunks : {1u, 2u, 4u, 8u, 64u}) {
    ScanStats par;
    auto out = pairs;
    WorkerPool pool(1);
    scan_parallel_inplace(out, pool, chunks, &par);
    CHECK(par.combines <= 2 * seq.combines);
    if (chunks == 1) CHECK(par.combines == seq.combines);
  }
}

TEST_CASE("float scans run with relaxed tolerance") {
  CounterRng rng(7);
  const auto pairs = verify::random_pairs(rng, 4096, 4);
  BasicPairSequence<float> f(pairs.size(), pairs.width());
  for (std::size_t i = 0; i < pairs.a.data().size(); ++i) {
    f.a.data()[i] = std::complex<float>(pairs.a.data()[i]);
    f.b.data()[i] = std::complex<float>(pairs.b.data()[i]);
  }
  const auto ref = scan_sequential(pairs);
  const auto out = scan_parallel(f, 4);
  std::vector<std::complex<double>> widened(out.b.data().begin(), out.b.data().end());
  CHECK(max_relative_error(widened, ref.b.data()) < 1e-4);
}

TEST_CASE("adjoint of zero output gradients is zero") {
  CounterRng rng(8);
  const auto a = verify::random_stable_a(rng, 3);
  const auto steps = verify::random_steps(rng, 12, 3);
  const auto g = siso_gradients(a, steps, std::vector<double>(12, 0.0));
  for (const auto& v : g.d_a) CHECK(v == std::complex<double>(0));
  for (std::size_t k = 0; k < 12; ++k) {
    CHECK(g.d_delta[k] == 0.0);
    CHECK(g.d_u[k] == 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(g.d_b[k][j] == std::complex<double>(0));
      CHECK(g.d_c[k][j] == std::complex<double>(0));
    }
  }
}

TEST_CASE("adjoint gradients match central finite differences") {
  CounterRng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a0 = verify::random_stable_a(rng, 2);
    ssm::ComplexVector entries(a0.entries().begin(), a0.entries().end());
    auto steps = verify::random_steps(rng, 16, 2);
    for (auto& s : steps) s.delta = rng.uniform(0.05, 1.0);
    std::vector<double> dy(16);
    for (auto& v : dy) v = rng.uniform(-1, 1);
    auto loss = [&] {
      const auto y = ssm::run_sequential(ssm::DiagonalMatrixA(entries), steps);
      double l = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) l += dy[k] * y[k];
      return l;
    };
    AdjointOptions opts;
    opts.checkpoint_interval = 5;
    const auto g = siso_gradients(ssm::DiagonalMatrixA(entries), steps, dy, opts);

    std::vector<double> adj, fd;
    for (std::size_t j = 0; j < 2; ++j) {
      double re = entries[j].real(), im = entries[j].imag();
      auto set = [&] { entries[j] = {re, im}; };
      adj.push_back(g.d_a[j].real());
      fd.push_back(verify::central_difference(re, [&] { set(); return loss(); }));
      set();
      adj.push_back(g.d_a[j].imag());
      fd.push_back(verify::central_difference(im, [&] { set(); return loss(); }));
      set();
    }
    CHECK(verify::gradient_error(adj, fd) < 1e-5);

    adj.clear();
    fd.clear();
    for (std::size_t k = 0; k < steps.size(); ++k) {
      adj.push_back(g.d_delta[k]);
      fd.push_back(verify::central_difference(steps[k].delta, loss));
    }
    CHECK(verify::gradient_error(adj, fd) < 1e-5);

    adj.clear();
    fd.clear();
    for (std::size_t k = 0; k < steps.size(); ++k) {
      adj.push_back(g.d_u[k]);
      fd.push_back(verify::central_difference(steps[k].u, loss));
    }
    CHECK(verify::gradient_error(adj, fd) < 1e-5);

    for (auto member : {&ssm::SisoStep::b, &ssm::SisoStep::c}) {
      adj.clear();
      fd.clear();
      const auto& grads = member == &ssm::SisoStep::b ? g.d_b : g.d_c;
      for (std::size_t k = 0; k < steps.size(); ++k) {
        for (std::size_t j = 0; j < 2; ++j) {
          auto& z = (steps[k].*member)[j];
          double re = z.real(), im = z.imag();
          adj.push_back(grads[k][j].real());
          fd.push_back(verify::central_difference(re, [&] { z = {re, im}; return loss(); }));
          z = {re, im};
          adj.push_back(grads[k][j].imag());
          fd.push_back(verify::central_difference(im, [&] { z = {re, im}; return loss(); }));
          z = {re, im};
        }
      }
      CHECK(verify::gradient_error(adj, fd) < 1e-5);
    }
  }
}

TEST_CASE("delta gradient of a two-step LTI instance has the closed form") {
  // y_1 = Re(c . (exp(A d1) b u0 + b u1))  =>  dy_1/dd1 = Re(sum_j c_j A_j exp(A_j d1) b_j) u0
  const ssm::ComplexVector entries = {{-0.7, 1.3}, {-0.2, -0.4}};
  const ssm::DiagonalMatrixA a(entries);
  const ssm::ComplexVector b = {{0.5, -0.1}, {0.3, 0.8}};
  const ssm::ComplexVector c = {{1.1, 0.2}, {-0.6, 0.4}};
  const double d1 = 0.45, u0 = 1.7, u1 = -0.3;
  const std::vector<ssm::SisoStep> steps = {{0.0, b, c, u0}, {d1, b, c, u1}};
  const auto g = siso_gradients(a, steps, std::vector<double>{0.0, 1.0});
  std::complex<double> expected = 0.0;
  for (std::size_t j = 0; j < 2; ++j) expected += c[j] * entries[j] * std::exp(entries[j] * d1) * b[j];
  CHECK(g.d_delta[1] == doctest::Approx(expected.real() * u0).epsilon(1e-14));
  CHECK(g.d_delta[0] == 0.0);
}

TEST_CASE("checkpoint interval does not change the gradients") {
  CounterRng rng(10);
  const auto a = verify::random_stable_a(rng, 3);
  const auto steps = verify::random_steps(rng, 50, 3);
  std::vector<double> dy(50);
  for (auto& v : dy) v = rng.uniform(-1, 1);
  const auto reference = siso_gradients(a, steps, dy, {1000, {}});
  for (std::size_t interval : {1u, 3u, 7u, 49u, 50u}) {
    const auto g = siso_gradients(a, steps, dy, {interval, {}});
    CHECK(max_relative_error(g.d_delta, reference.d_delta) < 1e-14);
    CHECK(max_relative_error(g.d_a, reference.d_a) < 1e-14);
  }
}

TEST_CASE("adjoint with explicit states") {
  CounterRng rng(11);
  const auto a = verify::random_stable_a(rng, 2);
  const auto steps = verify::random_steps(rng, 20, 2);
  const auto leaves = make_leaves(a, steps);
  const auto states = scan_sequential(leaves).b;
  ComplexRows grads(20, 2);
  for (auto& v : grads.data()) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  const auto with_states = adjoint_scan_with_states(leaves, states, grads);
  const auto recomputed = adjoint_scan(leaves, grads, {4, {}});
  CHECK(max_relative_error(with_states.a.data(), recomputed.a.data()) < 1e-14);
  CHECK(max_relative_error(with_states.b.data(), recomputed.b.data()) < 1e-14);
  CHECK_THROWS_AS(adjoint_scan_with_states(leaves, ComplexRows(19, 2), grads), ContractError);
  CHECK_THROWS_AS(adjoint_scan(leaves, ComplexRows(20, 3)), ContractError);
}
