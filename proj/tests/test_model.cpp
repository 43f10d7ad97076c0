#include <doctest.h>

#include <cmath>
#include <functional>

#include "t2t/errors.hpp"
#include "t2t/generator.hpp"
#include "t2t/model.hpp"

using namespace t2t;
using namespace t2t::diff;

namespace {

ModelConfig small_config(Variant variant = Variant::Full, std::size_t d = 6) {
  ModelConfig c;
  c.hidden = d;
  c.source_vocab = 5;
  c.target_vocab = 6;
  c.eos = 5;
  c.variant = variant;
  return c;
}

// 0(1(3, 4), 2(5, 6)) in preorder: 0 1 3 4 2 5 6.
EncodedTree seven_node_tree() {
  EncodedTree t;
  t.label = {0, 1, 2, 3, 4, 0, 1};
  t.left = {1, 2, -1, -1, 5, -1, -1};
  t.right = {4, 3, -1, -1, 6, -1, -1};
  return t;
}

EncodedTree single(int label) { return {{label}, {-1}, {-1}}; }

std::vector<double> vals(const Tape& t, Var v) {
  auto s = t.value(v);
  return {s.begin(), s.end()};
}

// Plain recursive evaluation of the encoder with doubles, no tape.
struct Naive {
  const ParamSet& ps;
  const Model::Ids& ids;
  std::size_t d;

  double sig(double x) const { return 1.0 / (1.0 + std::exp(-x)); }

  std::pair<std::vector<double>, std::vector<double>> node(const EncodedTree& t, int i) const {
    std::vector<double> zero(d, 0.0);
    auto [hl, cl] = t.left[i] >= 0 ? node(t, t.left[i]) : std::pair{zero, zero};
    auto [hr, cr] = t.right[i] >= 0 ? node(t, t.right[i]) : std::pair{zero, zero};
    std::vector<double> in;
    in.insert(in.end(), hl.begin(), hl.end());
    in.insert(in.end(), hr.begin(), hr.end());
    for (std::size_t k = 0; k < d; ++k) in.push_back(ps[ids.source_embedding].value.at(k, t.label[i]));
    const auto& w = ps[ids.encoder.weight].value;
    const auto& b = ps[ids.encoder.bias].value;
    std::vector<double> z(5 * d);
    for (std::size_t r = 0; r < 5 * d; ++r) {
      z[r] = b[r];
      for (std::size_t c = 0; c < in.size(); ++c) z[r] += w.at(r, c) * in[c];
    }
    std::vector<double> h(d), c(d);
    for (std::size_t k = 0; k < d; ++k) {
      c[k] = sig(z[k]) * std::tanh(z[4 * d + k]) + sig(z[d + k]) * cl[k] + sig(z[2 * d + k]) * cr[k];
      h[k] = sig(z[3 * d + k]) * std::tanh(c[k]);
    }
    return {h, c};
  }
};

}  // namespace

TEST_CASE("variant names") {
  CHECK(parse_variant("full") == Variant::Full);
  CHECK(parse_variant("no-pf") == Variant::NoParentFeed);
  CHECK(parse_variant("no-attn") == Variant::NoAttention);
  CHECK(variant_name(Variant::NoParentFeed) == "no-pf");
  CHECK_THROWS_AS(parse_variant("attn"), std::invalid_argument);
}

TEST_CASE("parameter shapes") {
  const std::size_t d = 6;
  Model full(small_config(Variant::Full, d));
  const auto& ps = full.params();
  auto shape = [&](const char* name) { return ps[*ps.find(name)].value.shape(); };
  CHECK(shape("src_embed") == std::vector<std::size_t>{d, 5});
  CHECK(shape("tgt_embed") == std::vector<std::size_t>{d, 6});
  CHECK(shape("out_W") == std::vector<std::size_t>{6, d});
  CHECK(shape("att_W0") == std::vector<std::size_t>{d, d});
  CHECK(shape("att_W1") == std::vector<std::size_t>{d, d});
  CHECK(shape("att_W2") == std::vector<std::size_t>{d, d});
  CHECK(shape("encoder.W") == std::vector<std::size_t>{5 * d, 3 * d});
  CHECK(shape("lstm_L.W") == std::vector<std::size_t>{4 * d, 3 * d});
  CHECK(shape("lstm_R.W") == std::vector<std::size_t>{4 * d, 3 * d});

  Model no_pf(small_config(Variant::NoParentFeed, d));
  CHECK(no_pf.params()[*no_pf.params().find("lstm_L.W")].value.shape() == std::vector<std::size_t>{4 * d, 2 * d});
  Model no_attn(small_config(Variant::NoAttention, d));
  CHECK_FALSE(no_attn.params().find("att_W0"));
  CHECK_THROWS_AS(Model(ModelConfig{0, 1, 1, 0, Variant::Full}), ShapeError);
}

TEST_CASE("encoder") {
  Model m(small_config());
  m.init_uniform(0.5, 3);
  Tape t(m.params());

  SUBCASE("single leaf is one tree cell over zero children") {
    EncoderStates enc = m.encode(t, single(2));
    REQUIRE(enc.size() == 1);
    Var zero = t.zeros(6);
    LstmState direct = tree_lstm_cell(t, m.ids().encoder, {zero, zero}, {zero, zero},
                                      t.column(m.ids().source_embedding, 2));
    CHECK(vals(t, enc.root().h) == vals(t, direct.h));
    CHECK(vals(t, enc.root().c) == vals(t, direct.c));
  }
  SUBCASE("seven-node root matches a straight-line evaluation") {
    const EncodedTree tree = seven_node_tree();
    EncoderStates enc = m.encode(t, tree);
    CHECK(enc.size() == 7);
    Naive naive{m.params(), m.ids(), 6};
    auto [h, c] = naive.node(tree, 0);
    for (std::size_t k = 0; k < 6; ++k) {
      CHECK(t.value(enc.root().h)[k] == doctest::Approx(h[k]).epsilon(1e-12));
      CHECK(t.value(enc.root().c)[k] == doctest::Approx(c[k]).epsilon(1e-12));
    }
    for (const auto& s : enc.nodes) CHECK(t.length(s.h) == 6);
  }
  SUBCASE("unknown labels are rejected") {
    CHECK_THROWS_AS(m.encode(t, single(5)), VocabError);
    CHECK_THROWS_AS(m.encode(t, EncodedTree{}), ShapeError);
  }
}

TEST_CASE("attention") {
  Model m(small_config());
  m.init_uniform(0.5, 4);
  Tape t(m.params());

  SUBCASE("identical source states give uniform weights") {
    EncoderStates enc;
    const std::vector<double> hv{0.1, 0.2, -0.3, 0.4, 0.0, 0.9};
    Var h = t.input(hv);
    for (int i = 0; i < 4; ++i) enc.nodes.push_back({h, h});
    Attention a = m.attend(t, t.input(std::vector<double>(6, 0.3)), enc);
    for (double w : t.value(a.weights)) CHECK(w == doctest::Approx(0.25).epsilon(1e-14));
    for (std::size_t k = 0; k < 6; ++k) CHECK(t.value(a.context)[k] == doctest::Approx(hv[k]).epsilon(1e-14));
  }
  SUBCASE("single source node") {
    EncoderStates enc = m.encode(t, single(1));
    Attention a = m.attend(t, t.input(std::vector<double>(6, -0.2)), enc);
    CHECK(vals(t, a.weights) == std::vector<double>{1.0});
    CHECK(vals(t, a.context) == vals(t, enc.root().h));
  }
  SUBCASE("weights form a distribution") {
    EncoderStates enc = m.encode(t, seven_node_tree());
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> q(6);
      for (auto& v : q) v = 2.0 * uniform01(rng) - 1.0;
      Attention a = m.attend(t, t.input(q), enc);
      CHECK(t.length(a.weights) == 7);
      double total = 0.0;
      for (double w : t.value(a.weights)) total += w;
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("combine") {
  Model m(small_config());
  Tape t(m.params());
  Var zero = t.zeros(6);
  for (double v : t.value(m.combine(t, zero, zero))) CHECK(v == 0.0);

  auto& ps = m.params();
  for (auto id : {*m.ids().att_w1, *m.ids().att_w2}) {
    ps[id].value.fill(0.0);
    for (std::size_t k = 0; k < 6; ++k) ps[id].value.at(k, k) = 1.0;
  }
  Tape t2(ps);
  Var half = t2.input(std::vector<double>(6, 0.5));
  for (double v : t2.value(m.combine(t2, half, half))) CHECK(v == doctest::Approx(std::tanh(1.0)).epsilon(1e-15));

  m.init_uniform(3.0, 8);
  Tape t3(m.params());
  std::vector<double> big(6, 5.0);
  for (double v : t3.value(m.combine(t3, t3.input(big), t3.input(big)))) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("predict value and argmax") {
  Model m(small_config());
  Tape t(m.params());
  Var e = t.input(std::vector<double>(6, 0.7));
  double total = 0.0;
  for (double p : t.value(m.predict_value(t, e))) {
    CHECK(p == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    total += p;
  }
  CHECK(total == doctest::Approx(1.0));
  const std::vector<double> tie{0.1, 0.2, 0.9, 0.3, 0.0, 0.9};
  CHECK(argmax(tie) == 2);

  // Scaling the logits keeps the greedy choice.
  m.init_uniform(0.5, 1);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> ev(6);
    for (auto& v : ev) v = 2.0 * uniform01(rng) - 1.0;
    Tape tt(m.params());
    Var x = tt.input(ev);
    const auto a = argmax(tt.value(m.predict_value(tt, x)));
    const auto b = argmax(tt.value(m.predict_value(tt, tt.scale(x, 3.7))));
    CHECK(a == b);
  }
}

TEST_CASE("expand") {
  SUBCASE("identical left and right parameters give identical children") {
    Model m(small_config());
    m.init_uniform(0.5, 2);
    auto& ps = m.params();
    ps[m.ids().right.weight].value = ps[m.ids().left.weight].value;
    ps[m.ids().right.bias].value = ps[m.ids().left.bias].value;
    Tape t(ps);
    EncoderStates enc = m.encode(t, seven_node_tree());
    auto [l, r] = m.expand(t, enc.root(), 1, t.input(std::vector<double>(6, 0.1)));
    CHECK(vals(t, l.h) == vals(t, r.h));
    CHECK(vals(t, l.c) == vals(t, r.c));
  }
  SUBCASE("distinct parameters give distinct children") {
    Model m(small_config());
    m.init_uniform(0.5, 2);
    Tape t(m.params());
    EncoderStates enc = m.encode(t, seven_node_tree());
    auto [l, r] = m.expand(t, enc.root(), 1, t.input(std::vector<double>(6, 0.1)));
    CHECK(vals(t, l.h) != vals(t, r.h));
  }
  SUBCASE("without parent feeding e_t is ignored") {
    Model m(small_config(Variant::NoParentFeed));
    m.init_uniform(0.5, 2);
    Tape t(m.params());
    EncoderStates enc = m.encode(t, seven_node_tree());
    auto [l1, r1] = m.expand(t, enc.root(), 3, t.input(std::vector<double>(6, 0.1)));
    auto [l2, r2] = m.expand(t, enc.root(), 3, t.input(std::vector<double>(6, -0.8)));
    CHECK(vals(t, l1.h) == vals(t, l2.h));
    CHECK(vals(t, r1.c) == vals(t, r2.c));
  }
  SUBCASE("parent feeding uses e_t") {
    Model m(small_config());
    m.init_uniform(0.5, 2);
    Tape t(m.params());
    EncoderStates enc = m.encode(t, seven_node_tree());
    auto [l1, r1] = m.expand(t, enc.root(), 3, t.input(std::vector<double>(6, 0.1)));
    auto [l2, r2] = m.expand(t, enc.root(), 3, t.input(std::vector<double>(6, -0.8)));
    CHECK(vals(t, l1.h) != vals(t, l2.h));
  }
  SUBCASE("eos cannot be expanded") {
    Model m(small_config());
    Tape t(m.params());
    EncoderStates enc = m.encode(t, single(0));
    CHECK_THROWS_AS(m.expand(t, enc.root(), 5, enc.root().h), EosExpandError);
  }
}

TEST_CASE("greedy decoding") {
  SUBCASE("a model biased toward eos decodes the empty tree") {
    Model m(small_config(Variant::NoAttention));
    m.init_uniform(0.1, 1);
    auto& w = m.params()[m.ids().output].value;
    w.fill(0.0);
    Tape t(m.params());
    const auto h = t.value(m.encode(t, seven_node_tree()).root().h);
    for (std::size_t k = 0; k < 6; ++k) w.at(5, k) = h[k] >= 0 ? 100.0 : -100.0;
    CHECK(m.decode_greedy(seven_node_tree()).empty());
  }
  SUBCASE("node budget of one") {
    Model m(small_config());
    m.init_uniform(0.1, 1);
    m.params()[m.ids().output].value.fill(0.0);  // uniform: index 0 wins, never EOS
    CHECK_THROWS_AS(m.decode_greedy(seven_node_tree(), {.max_nodes = 1, .max_depth = 80}), LimitExceeded);
    try {
      m.decode_greedy(seven_node_tree(), {.max_nodes = 1000, .max_depth = 3});
      FAIL("expected a depth limit");
    } catch (const LimitExceeded& e) {
      CHECK(e.kind() == LimitExceeded::Kind::Depth);
    }
  }
  SUBCASE("decoding is deterministic") {
    Model m(small_config());
    m.init_uniform(0.8, 12);
    auto run = [&] {
      try {
        return m.decode_greedy(seven_node_tree(), {.max_nodes = 200, .max_depth = 80}).label;
      } catch (const LimitExceeded&) {
        return std::vector<int>{-1};
      }
    };
    CHECK(run() == run());
  }
}

TEST_CASE("the no-attention variant reads only the root state") {
  Model m(small_config(Variant::NoAttention));
  m.init_uniform(0.3, 1);
  Tape t(m.params());
  EncoderStates enc = m.encode(t, seven_node_tree());
  EncodedTree target = seven_node_tree();
  for (auto& l : target.label) l = l % 5;
  (void)m.teacher_forced_loss(t, seven_node_tree(), target);
  Var e = m.node_embedding(t, enc.root().h, enc);
  CHECK(enc.attention_reads() == 0);
  CHECK(vals(t, e) == vals(t, enc.root().h));

  Model full(small_config(Variant::Full));
  full.init_uniform(0.3, 1);
  Tape t2(full.params());
  EncoderStates enc2 = full.encode(t2, seven_node_tree());
  full.node_embedding(t2, enc2.root().h, enc2);
  CHECK(enc2.attention_reads() == 1);
}

TEST_CASE("teacher-forced loss") {
  Model m(small_config());
  m.init_uniform(0.3, 5);
  SUBCASE("empty target has one eos site") {
    Tape t(m.params());
    LossResult r = m.teacher_forced_loss(t, seven_node_tree(), EncodedTree{});
    CHECK(r.sites == 1);
    Tape t2(m.params());
    EncoderStates enc = m.encode(t2, seven_node_tree());
    Var p = m.predict_value(t2, m.node_embedding(t2, enc.root().h, enc));
    CHECK(t.value(r.loss)[0] == doctest::Approx(-std::log(t2.value(p)[5])).epsilon(1e-14));
  }
  SUBCASE("site counting") {
    Tape t(m.params());
    CHECK(m.teacher_forced_loss(t, seven_node_tree(), single(2)).sites == 3);
    EncodedTree target = seven_node_tree();
    for (auto& l : target.label) l = l % 5;
    CHECK(m.teacher_forced_loss(t, seven_node_tree(), target).sites == 15);
  }
  SUBCASE("eos and unknown labels are not valid targets") {
    Tape t(m.params());
    CHECK_THROWS_AS(m.teacher_forced_loss(t, seven_node_tree(), single(5)), VocabError);
    CHECK_THROWS_AS(m.teacher_forced_loss(t, seven_node_tree(), single(6)), VocabError);
  }
}
