#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "davrp/checkpoint.hpp"
#include "davrp/config.hpp"
#include "davrp/cvrplib.hpp"
#include "davrp/dataset_io.hpp"
#include "davrp/generator.hpp"

using namespace davrp;
namespace fs = std::filesystem;

namespace {

void check_equal(const Instance& a, const Instance& b) {
    CHECK(a.variant == b.variant);
    CHECK(a.capacity == b.capacity);
    CHECK(a.xs == b.xs);  // 17 significant digits round-trip doubles bit-exactly
    CHECK(a.ys == b.ys);
    CHECK(a.demands == b.demands);
    CHECK(a.tw_start == b.tw_start);
    CHECK(a.tw_end == b.tw_end);
    CHECK(a.service == b.service);
    if (a.variant.duration_limit) CHECK(a.dist_limit == b.dist_limit);
}

const char* kToyVrp = R"(NAME : toy5
COMMENT : hand built
TYPE : CVRP
DIMENSION : 5
EDGE_WEIGHT_TYPE : EUC_2D
CAPACITY : 10
NODE_COORD_SECTION
1 10 10
2 20 10
3 20 20
4 10 20
5 15 40
DEMAND_SECTION
1 0
2 3
3 4
4 5
5 2
DEPOT_SECTION
1
-1
EOF
)";

const char* kShiftedVrp = R"(NAME : shifted
DIMENSION : 4
EDGE_WEIGHT_TYPE : EUC_2D
CAPACITY : 9
NODE_COORD_SECTION
1 5 0
2 10 0
3 0 0
4 10 5
DEMAND_SECTION
1 2
2 3
3 0
4 4
DEPOT_SECTION
3
-1
EOF
)";

}  // namespace

TEST_CASE("instances round-trip through text on every variant") {
    for (int bits = 0; bits < 16; ++bits) {
        VariantSpec v = VariantSpec::all16()[bits];
        Instance inst = generate_instance(7, v, 3100 + bits);
        std::stringstream ss;
        write_instance(ss, inst);
        Instance back = read_instance(ss);
        check_equal(inst, back);
    }
}

TEST_CASE("several instances can share one stream") {
    std::stringstream ss;
    std::vector<Instance> out;
    for (int i = 0; i < 3; ++i) {
        VariantSpec v = VariantSpec::all16()[5 * i];
        out.push_back(generate_instance(4 + i, v, 3200 + i));
        write_instance(ss, out.back());
    }
    auto back = read_instances(ss);
    REQUIRE(back.size() == 3);
    for (int i = 0; i < 3; ++i) check_equal(out[i], back[i]);
}

TEST_CASE("instance files round-trip") {
    fs::path dir = fs::temp_directory_path() / "davrp_io_inst";
    fs::create_directories(dir);
    VariantSpec v = *VariantSpec::from_name("ovrpbltw");
    Instance inst = generate_instance(6, v, 3300);
    const std::string path = (dir / "one.txt").string();
    write_instance_file(path, inst);
    check_equal(inst, read_instance_file(path));
    CHECK_THROWS_AS(read_instance_file((dir / "absent.txt").string()), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("malformed instance text is rejected") {
    auto reject = [](const std::string& text) {
        std::istringstream is(text);
        CHECK_THROWS_AS(read_instance(is), std::runtime_error);
    };
    reject("");
    reject("cvrp 1 30 10000\n0 0 0 0\n1 0.5 0.5 3\n");   // wrong magic
    reject("vrp 1 30 0000\n0 0 0 0\n1 0.5 0.5 3\n");     // flags too short
    reject("vrp 1 30 01000\n0 0 0 0\n1 0.5 0.5 3\n");    // capacity flag off
    reject("vrp 1 30 1x000\n0 0 0 0\n1 0.5 0.5 3\n");    // junk flag char
    reject("vrp 2 30 10000\n0 0 0 0\n1 0.5 0.5 3\n");    // truncated node list
    reject("vrp 1 30 10000\n1 0.5 0.5 3\n0 0 0 0\n");    // out-of-order nodes
    reject("vrp 1 30 10000\n0 0 0 2\n1 0.5 0.5 3\n");    // depot with demand
    reject("vrp 1 30 10010\n0 0 0 0\n1 0.5 0.5 3\n");    // missing limit line
    reject("vrp 1 0 10000\n0 0 0 0\n1 0.5 0.5 3\n");     // zero capacity
}

TEST_CASE("solutions round-trip and reject malformed text") {
    Problem p = Problem::from(generate_instance(4, VariantSpec{}, 3400));
    Solution sol = make_solution({0, 1, 2, 0, 3, 4, 0}, p);
    std::stringstream ss;
    write_solution(ss, sol);
    SolutionFileData back = read_solution(ss);
    CHECK(back.cost == sol.cost);
    CHECK(back.sequence == sol.sequence);

    fs::path dir = fs::temp_directory_path() / "davrp_io_sol";
    fs::create_directories(dir);
    const std::string path = (dir / "one.sol").string();
    write_solution_file(path, sol);
    SolutionFileData fb = read_solution_file(path);
    CHECK(fb.cost == sol.cost);
    CHECK(fb.sequence == sol.sequence);
    fs::remove_all(dir);

    auto reject = [](const std::string& text) {
        std::istringstream is(text);
        CHECK_THROWS_AS(read_solution(is), std::runtime_error);
    };
    reject("");
    reject("price 1.5\nseq 0 1 0\n");
    reject("cost abc\nseq 0 1 0\n");
    reject("cost 1.5\n0 1 0\n");
    reject("cost 1.5\nseq\n");
}

TEST_CASE("config text parsing") {
    auto kv = parse_config_text(
        "# a comment line\n"
        "\n"
        "n = 50   # trailing comment\n"
        "tasks = cvrp, vrptw\n"
        "lr=1e-3\n");
    CHECK(kv.size() == 3);
    CHECK(kv.at("n") == "50");
    CHECK(kv.at("tasks") == "cvrp, vrptw");
    CHECK(kv.at("lr") == "1e-3");

    CHECK_THROWS_AS(parse_config_text("n 50\n"), std::runtime_error);
    CHECK_THROWS_AS(parse_config_text("= 50\n"), std::runtime_error);
    CHECK_THROWS_AS(parse_config_file("/nonexistent/path.cfg"), std::runtime_error);
}

TEST_CASE("config keys reach the training configuration") {
    TrainConfig cfg;
    apply_config(cfg, parse_config_text(
                          "n = 50\n"
                          "capacity = 40\n"
                          "batch = 32\n"
                          "instances_per_epoch = 640\n"
                          "epochs = 7\n"
                          "n_starts = 4\n"
                          "lr = 1e-3\n"
                          "weight_decay = 1e-5\n"
                          "clip_norm = 2.5\n"
                          "lr_gamma = 0.5\n"
                          "val_instances = 16\n"
                          "seed = 123\n"
                          "out_dir = /tmp/davrp_cfg\n"
                          "tasks = cvrp, ovrpbltw\n"
                          "milestones = 5, 6\n"
                          "d_h = 32\n"
                          "n_heads = 4\n"
                          "n_layers = 2\n"
                          "d_ff = 64\n"
                          "d_prompt = 48\n"
                          "clip = 8\n"
                          "top_k = 25\n"
                          "sparse_fn = entmax15\n"
                          "topk_style = literal\n"
                          "prompt_pos = sparse\n"
                          "use_prompt = 1\n"
                          "use_sparse = 0\n"));
    CHECK(cfg.n == 50);
    CHECK(cfg.capacity_override == 40);
    CHECK(cfg.batch == 32);
    CHECK(cfg.instances_per_epoch == 640);
    CHECK(cfg.epochs == 7);
    CHECK(cfg.n_starts == 4);
    CHECK(cfg.lr == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(cfg.weight_decay == doctest::Approx(1e-5).epsilon(1e-15));
    CHECK(cfg.clip_norm == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(cfg.lr_gamma == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(cfg.val_instances == 16);
    CHECK(cfg.seed == 123);
    CHECK(cfg.out_dir == "/tmp/davrp_cfg");
    CHECK(cfg.tasks == std::vector<std::string>{"cvrp", "ovrpbltw"});
    CHECK(cfg.milestones == std::vector<int>{5, 6});
    CHECK(cfg.model.d_h == 32);
    CHECK(cfg.model.n_heads == 4);
    CHECK(cfg.model.n_layers == 2);
    CHECK(cfg.model.d_ff == 64);
    CHECK(cfg.model.d_prompt == 48);
    CHECK(cfg.model.clip == doctest::Approx(8.0).epsilon(1e-15));
    CHECK(cfg.model.top_k == 25);
    CHECK(cfg.model.sparse_fn == SparseFn::Entmax15);
    CHECK(cfg.model.topk_style == TopkStyle::Literal);
    CHECK(cfg.model.prompt_pos == PromptPos::Sparse);
    CHECK(cfg.model.use_prompt == true);
    CHECK(cfg.model.use_sparse == false);

    CHECK_THROWS_AS(apply_config(cfg, {{"bogus", "1"}}), std::runtime_error);
    CHECK_THROWS_AS(apply_config(cfg, {{"n", "abc"}}), std::runtime_error);
}

TEST_CASE("benchmark files parse and map onto the unit square") {
    std::istringstream toy(kToyVrp);
    CvrplibInstance raw = parse_cvrplib(toy);
    CHECK(raw.name == "toy5");
    CHECK(raw.dimension == 5);
    CHECK(raw.capacity == 10);
    CHECK(raw.depot == 0);
    CHECK(raw.xs[4] == 15.0);
    CHECK(raw.demands == std::vector<int>{0, 3, 4, 5, 2});

    CvrplibProblem cp = to_unit_problem(raw);
    CHECK(cp.ids == std::vector<int>{0, 1, 2, 3, 4});
    // span is the y extent (30), so aspect ratio is preserved
    CHECK(cp.unit.xs[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(cp.unit.xs[1] == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(cp.unit.ys[4] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cp.unit.capacity == 10);
    CHECK(cp.unit.variant == VariantSpec{});

    // a depot mid-file gets moved to slot 0 with the id map recording it
    std::istringstream sh(kShiftedVrp);
    CvrplibProblem scp = to_unit_problem(parse_cvrplib(sh));
    CHECK(scp.raw.depot == 2);
    CHECK(scp.ids == std::vector<int>{2, 0, 1, 3});
    CHECK(scp.unit.demands == std::vector<int>{0, 2, 3, 4});
    CHECK(scp.unit.xs[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(scp.unit.xs[2] == doctest::Approx(1.0).epsilon(1e-12));

    CHECK(rounded_cost(scp, {0, 1, 2, 0}) == 20);
    CHECK(rounded_cost(scp, {0, 3, 0}) == 22);  // 11.18 rounds to 11, twice
}

TEST_CASE("benchmark parser rejects unusable files") {
    auto reject = [](const std::string& text) {
        std::istringstream is(text);
        CHECK_THROWS_AS(parse_cvrplib(is), std::runtime_error);
    };
    reject("NAME : x\nEOF\n");  // no dimension
    reject("DIMENSION : 2\nCAPACITY : 5\nEDGE_WEIGHT_TYPE : GEO\n"
           "NODE_COORD_SECTION\n1 0 0\n2 1 1\nDEMAND_SECTION\n1 0\n2 1\nEOF\n");
    reject("DIMENSION : 2\nCAPACITY : 5\nNODE_COORD_SECTION\n1 0 0\n2 1 1\n"
           "DEMAND_SECTION\n1 7\n2 0\nEOF\n");  // depot demand nonzero
    reject("DIMENSION : 2\nCAPACITY : 5\nNODE_COORD_SECTION\n1 0 0\n2 1 1\n"
           "DEMAND_SECTION\n1 0\n2 1\nDEPOT_SECTION\n1\n2\n-1\nEOF\n");  // two depots
    reject("DIMENSION : 2\nCAPACITY : 5\nNODE_COORD_SECTION\n1 0 0\nEOF\n");  // truncated

    // coincident nodes cannot be scaled
    CvrplibInstance flat;
    flat.dimension = 2;
    flat.capacity = 5;
    flat.xs = {1.0, 1.0};
    flat.ys = {2.0, 2.0};
    flat.demands = {0, 1};
    CHECK_THROWS_AS(to_unit_problem(flat), std::runtime_error);

    // over-capacity demand is caught at mapping time
    CvrplibInstance heavy;
    heavy.dimension = 2;
    heavy.capacity = 5;
    heavy.xs = {0.0, 1.0};
    heavy.ys = {0.0, 1.0};
    heavy.demands = {0, 6};
    CHECK_THROWS_AS(to_unit_problem(heavy), std::runtime_error);
}

TEST_CASE("best-known table reads name,cost rows") {
    fs::path dir = fs::temp_directory_path() / "davrp_io_bks";
    fs::create_directories(dir);
    const std::string path = (dir / "bks.csv").string();
    {
        std::ofstream os(path);
        os << "name,cost\n"
              "A-n32-k5,784\n"
              "toy5, 123.5\n";
    }
    auto bks = read_best_known(path);
    CHECK(bks.size() == 2);
    CHECK(bks.at("A-n32-k5") == doctest::Approx(784.0).epsilon(1e-15));
    CHECK(bks.at("toy5") == doctest::Approx(123.5).epsilon(1e-15));
    fs::remove_all(dir);
    CHECK_THROWS_AS(read_best_known((dir / "none.csv").string()), std::runtime_error);
}

TEST_CASE("tensor containers round-trip values and metadata") {
    ta::Param<float> w;
    w.name = "enc.w";
    w.shape = {2, 3};
    w.value = {1.5f, -2.25f, 0.0f, 3.125f, -0.875f, 42.0f};
    w.grad.assign(6, 0.0f);
    ta::Param<float> b;
    b.name = "enc.b";
    b.shape = {3};
    b.value = {0.5f, 0.25f, -0.125f};
    b.grad.assign(3, 0.0f);

    fs::path dir = fs::temp_directory_path() / "davrp_io_ckpt";
    fs::create_directories(dir);
    const std::string path = (dir / "t.ckpt").string();
    CHECK(!file_exists(path));
    save_tensors(path, {&w, &b}, {{"epoch", "3"}, {"note", "hello world"}});
    CHECK(file_exists(path));

    ta::Param<float> w2 = w, b2 = b;
    std::fill(w2.value.begin(), w2.value.end(), 0.0f);
    std::fill(b2.value.begin(), b2.value.end(), 0.0f);
    std::map<std::string, std::string> meta;
    load_tensors(path, {&w2, &b2}, &meta);
    CHECK(w2.value == w.value);
    CHECK(b2.value == b.value);
    CHECK(meta.at("epoch") == "3");
    CHECK(meta.at("note") == "hello world");
    CHECK(read_meta_file(path + ".meta") == meta);

    ta::Param<float> wrong = w;
    wrong.shape = {3, 2};
    CHECK_THROWS_AS(load_tensors(path, {&wrong, &b2}), std::runtime_error);
    ta::Param<float> missing = w;
    missing.name = "enc.other";
    CHECK_THROWS_AS(load_tensors(path, {&missing, &b2}), std::runtime_error);

    fs::remove_all(dir);
    CHECK_THROWS_AS(load_tensors(path, {&w2, &b2}), std::runtime_error);
}
