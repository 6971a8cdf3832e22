#include <boost/math/quadrature/tanh_sinh.hpp>

#include "doctest.h"
#include "fsrl/nn.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fsrl;
using ad::Matrix;
using ad::Tensor;
using fsrl::testing::beta_density;
using fsrl::testing::gradient_check;
using fsrl::testing::random_matrix;
using fsrl::testing::readout;

namespace {

nn::GraphBatch small_graph(std::mt19937_64& rng, int nodes, const std::vector<std::pair<int, int>>& edges) {
    return fsrl::testing::random_graph(rng, nodes, edges, 3, 2);
}

}  // namespace


TEST_SUITE("tensor") {

TEST_CASE("reverse mode matches central differences for every op") {
    std::mt19937_64 rng(41);
    for (const auto& c : fsrl::testing::grad_cases()) {
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<Tensor> inputs;
            for (auto [r, k] : c.shapes) inputs.push_back(Tensor::parameter(random_matrix(r, k, rng, c.lo, c.hi)));
            const auto seed = static_cast<std::uint64_t>(trial) + 100;
            const double err = gradient_check([&](const std::vector<Tensor>& x) { return readout(c.f(x), seed); },
                                              inputs, 1e-6, 1e-4);
            INFO("op " << c.name);
            CHECK(err <= 1e-4);
        }
    }
}

TEST_CASE("gradients are linear in the loss") {
    std::mt19937_64 rng(43);
    const Tensor w = Tensor::parameter(random_matrix(4, 3, rng));
    const Tensor x = Tensor::constant(random_matrix(5, 4, rng));
    auto f = [&] { return readout(ad::tanh(ad::matmul(x, w)), 1); };
    auto g = [&] { return readout(ad::square(ad::matmul(x, w)), 2); };
    w.node()->grad.resize(0, 0);
    f().backward();
    const Matrix gf = w.grad();
    w.node()->grad.resize(0, 0);
    g().backward();
    const Matrix gg = w.grad();
    w.node()->grad.resize(0, 0);
    ad::add(ad::scale(f(), 2.0), ad::scale(g(), -3.0)).backward();
    CHECK((w.grad() - (2.0 * gf - 3.0 * gg)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("no-grad mode records nothing") {
    const Tensor w = Tensor::parameter(Matrix::Ones(2, 2));
    {
        ad::NoGradGuard guard;
        CHECK_FALSE(ad::grad_enabled());
        const Tensor y = ad::matmul(w, w);
        CHECK(y.node()->parents.empty());
    }
    CHECK(ad::grad_enabled());
}

TEST_CASE("shape errors") {
    const Tensor a = Tensor::constant(Matrix::Ones(2, 3));
    CHECK_THROWS_AS(ad::matmul(a, a), ad::ShapeError);
    CHECK_THROWS_AS(ad::add(a, Tensor::constant(Matrix::Ones(3, 2))), ad::ShapeError);
    CHECK_THROWS_AS(ad::affine(a, Tensor::constant(Matrix::Ones(3, 2)), Tensor::constant(Matrix::Ones(1, 3))),
                    ad::ShapeError);
}

TEST_CASE("Beta distribution") {
    // Beta(1, 1) is uniform.
    for (double v : {0.1, 0.5, 0.93}) CHECK(std::abs(nn::beta_log_prob(1.0, 1.0, v)) <= 1e-12);
    CHECK(std::abs(nn::beta_entropy(1.0, 1.0)) <= 1e-12);

    nn::Rng rng(47);
    double s = 0.0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) {
        const double v = nn::beta_sample(2.0, 2.0, rng);
        REQUIRE(v > 0.0);
        REQUIRE(v < 1.0);
        s += v;
    }
    // Three standard errors; the variance of Beta(2, 2) is 1/20.
    CHECK(std::abs(s / n - 0.5) <= 3.0 * std::sqrt(0.05 / n));

    boost::math::quadrature::tanh_sinh<double> q;
    const double h = q.integrate([](double v) {
        const double p = beta_density(2.0, 5.0, v);
        return p > 0.0 ? -p * std::log(p) : 0.0;
    }, 0.0, 1.0);
    CHECK(std::abs(nn::beta_entropy(2.0, 5.0) - h) <= 1e-6);
    CHECK(nn::beta_log_prob(2.0, 5.0, 0.3) == doctest::Approx(std::log(beta_density(2.0, 5.0, 0.3))).epsilon(1e-12));
}

TEST_CASE("categorical sampling") {
    nn::Rng rng(53);
    std::array<int, 3> counts{};
    for (int i = 0; i < 30000; ++i) ++counts[nn::sample_categorical({0.2, 0.0, 0.8}, rng)];
    CHECK(counts[1] == 0);
    CHECK(std::abs(counts[0] / 30000.0 - 0.2) <= 0.015);
}

TEST_CASE("Adam") {
    SUBCASE("zero gradient leaves parameters in place") {
        nn::ParameterSet ps;
        Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 0.3));
        ps.add("x", x);
        nn::Adam opt(ps, 0.1);
        x.grad_buffer().setZero();
        for (int i = 0; i < 10; ++i) CHECK(opt.step());
        CHECK(x.value()(0, 0) == 0.3);
    }
    SUBCASE("constant gradient moves by the learning rate") {
        nn::ParameterSet ps;
        Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 0.0));
        ps.add("x", x);
        nn::Adam opt(ps, 0.01);
        for (int i = 0; i < 5; ++i) {
            x.grad_buffer().setConstant(-3.0);
            opt.step();
        }
        CHECK(x.value()(0, 0) == doctest::Approx(0.05).epsilon(1e-6));
    }
    SUBCASE("quadratic bowl") {
        nn::ParameterSet ps;
        Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 0.1));
        ps.add("x", x);
        nn::Adam opt(ps, 2e-4);
        int reached = -1;
        for (int i = 0; i < 2000 && reached < 0; ++i) {
            ps.zero_grad();
            ad::scale(ad::square(x), 0.5).backward();
            opt.step();
            if (std::abs(x.value()(0, 0)) < 1e-3) reached = i + 1;
        }
        CHECK(reached > 0);
    }
    SUBCASE("non-finite gradient is skipped") {
        nn::ParameterSet ps;
        Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 1.0));
        ps.add("x", x);
        nn::Adam opt(ps, 0.1);
        x.grad_buffer().setConstant(std::numeric_limits<double>::quiet_NaN());
        CHECK_FALSE(opt.step());
        CHECK(x.value()(0, 0) == 1.0);
        CHECK(opt.steps() == 0);
    }
}

TEST_CASE("dense layers") {
    nn::Rng rng(59);
    const Tensor x = Tensor::constant(random_matrix(4, 3, rng));
    const auto z = nn::Linear::zeros(3, 5);
    CHECK(z(x).value().isZero(0.0));
    nn::Linear id = nn::Linear::zeros(3, 3);
    id.weight.mutable_value().setIdentity();
    CHECK(id(x).value() == x.value());

    auto mlp = nn::Mlp::init({3, 8, 2}, rng);
    REQUIRE(mlp.layers.size() == 2);
    const Matrix manual =
        ((x.value() * mlp.layers[0].weight.value()).rowwise() + mlp.layers[0].bias.value().row(0)).array().tanh().matrix() *
            mlp.layers[1].weight.value() +
        mlp.layers[1].bias.value().replicate(4, 1);
    CHECK((mlp(x).value() - manual).cwiseAbs().maxCoeff() <= 1e-12);

    // Glorot bound.
    const auto wide = nn::Linear::init(30, 50, rng);
    CHECK(wide.weight.value().cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 80.0));
    CHECK(wide.bias.value().isZero(0.0));
}

TEST_CASE("graph convolution on a single node") {
    nn::Rng rng(61);
    const auto layer = nn::GcnLayer::init(3, 4, 2, 6, rng, nn::Activation::Tanh, nn::Activation::Tanh);
    const auto g = small_graph(rng, 1, {});
    const Tensor h = Tensor::constant(g.node_features);
    Matrix self_in(1, 5);
    self_in << g.node_features, Matrix::Zero(1, 2);
    const Matrix m = layer.message(Tensor::constant(self_in)).value();
    Matrix upd(1, 6);
    upd << g.node_features, m;
    const Matrix expected = layer.update(Tensor::constant(upd)).value().array().tanh().matrix();
    CHECK((layer(h, g).value() - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("graph convolution is permutation equivariant") {
    nn::Rng rng(67);
    const auto layer = nn::GcnLayer::init(3, 3, 2, 6, rng, nn::Activation::Tanh, nn::Activation::Tanh);
    const auto g = small_graph(rng, 5, {{0, 1}, {1, 2}, {1, 3}, {3, 4}, {4, 1}});
    const std::vector<int> perm{3, 0, 4, 1, 2};  // new row i holds old node perm[i]
    std::vector<int> inv(5);
    for (int i = 0; i < 5; ++i) inv[perm[i]] = i;
    nn::GraphBatch p = g;
    for (int i = 0; i < 5; ++i) p.node_features.row(i) = g.node_features.row(perm[i]);
    for (std::size_t e = 0; e < g.source.size(); ++e) {
        p.source[e] = inv[g.source[e]];
        p.target[e] = inv[g.target[e]];
    }
    const Matrix a = nn::gcn_forward(layer, Tensor::constant(g.node_features), g, 3).value();
    const Matrix b = nn::gcn_forward(layer, Tensor::constant(p.node_features), p, 3).value();
    for (int i = 0; i < 5; ++i) CHECK((b.row(i) - a.row(perm[i])).cwiseAbs().maxCoeff() <= 1e-12);
    // Pooling then forgets the order entirely.
    CHECK((nn::sum_pool(Tensor::constant(a), g).value() - nn::sum_pool(Tensor::constant(b), p).value())
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
}

TEST_CASE("graph convolution gradients and edge sensitivity") {
    nn::Rng rng(71);
    auto layer = nn::GcnLayer::init(3, 3, 2, 5, rng, nn::Activation::Tanh, nn::Activation::Tanh);
    const auto g = small_graph(rng, 4, {{0, 1}, {1, 2}, {2, 0}, {2, 3}});
    std::vector<Tensor> params{layer.message.layers[0].weight, layer.message.layers[1].weight, layer.update.weight,
                               layer.update.bias, Tensor::parameter(g.node_features)};
    const double err = gradient_check(
        [&](const std::vector<Tensor>& x) {
            auto l = layer;
            l.message.layers[0].weight = x[0];
            l.message.layers[1].weight = x[1];
            l.update.weight = x[2];
            l.update.bias = x[3];
            return readout(nn::gcn_forward(l, x[4], g, 2), 9);
        },
        params, 1e-6);
    CHECK(err <= 1e-6);

    // Edge features reach the target node and nothing upstream of it.
    auto g2 = g;
    g2.edge_features.row(3).array() += 0.5;  // edge 2 -> 3
    const Matrix a = layer(Tensor::constant(g.node_features), g).value();
    const Matrix b = layer(Tensor::constant(g2.node_features), g2).value();
    CHECK((a.row(3) - b.row(3)).cwiseAbs().maxCoeff() > 1e-6);
    CHECK((a.topRows(3) - b.topRows(3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sum pooling over a disjoint union") {
    nn::Rng rng(73);
    nn::GraphBatch g;
    g.graphs = 3;
    g.node_graph = {0, 0, 1, 2, 2, 2};
    g.offset = {0, 2, 3};
    const Tensor h = Tensor::parameter(random_matrix(6, 4, rng));
    const Matrix pooled = nn::sum_pool(h, g).value();
    CHECK((pooled.row(0) - h.value().topRows(2).colwise().sum()).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((pooled.row(1) - h.value().row(2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((pooled.row(2) - h.value().bottomRows(3).colwise().sum()).cwiseAbs().maxCoeff() <= 1e-15);
    ad::sum(nn::sum_pool(h, g)).backward();
    CHECK(h.grad().isOnes(0.0));
}

TEST_CASE("parameter checkpoints round trip") {
    nn::Rng rng(79);
    const auto a = nn::Mlp::init({4, 6, 2}, rng);
    const auto b = nn::Mlp::init({4, 6, 2}, rng);
    nn::ParameterSet pa, pb;
    pa.add("net", a);
    pb.add("net", b);
    CHECK(pa.scalar_count() == 4 * 6 + 6 + 6 * 2 + 2);
    pb.load_json(pa.to_json());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa.entries()[i].first == pb.entries()[i].first);
        CHECK(pa.entries()[i].second.value() == pb.entries()[i].second.value());
    }

    nn::ParameterSet other;
    other.add("other", nn::Mlp::init({4, 6, 2}, rng));
    CHECK_THROWS(other.load_json(pa.to_json()));
    nn::ParameterSet narrow;
    narrow.add("net", nn::Mlp::init({4, 5, 2}, rng));
    CHECK_THROWS(narrow.load_json(pa.to_json()));
    CHECK_THROWS(pb.load_json("{not json"));
    CHECK_THROWS(pa.add("net.0.weight", Tensor::parameter(Matrix::Ones(1, 1))));
}

}  // TEST_SUITE
