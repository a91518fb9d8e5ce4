#include "support.hpp"

#include "tsdial/checkpoint.hpp"

#include <doctest.h>

#include <filesystem>

using namespace tsdial;
using tsdial::testing::toy_ontology;

namespace {

ModelConfig tiny() {
    ModelConfig c;
    c.embed_dim = 4;
    c.hidden_dim = 6;
    c.vocab_size = 9;
    c.max_decode_len = 5;
    c.max_input_len = 8;
    c.seed = 2;
    return c;
}

Vocabulary tiny_vocab() { return Vocabulary({"a", "b", "c", "d", "e"}); }

}  // namespace

TEST_CASE("student checkpoint round-trips bit-exactly after storage rounding") {
    StudentModel m(tiny());
    round_to_storage_precision(m.parameters());
    const std::string bytes = encode_checkpoint(make_checkpoint(m, tiny_vocab(), toy_ontology()));
    CHECK(bytes.substr(0, 8) == std::string("TSDCKPT\0", 8));
    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(back.kind == ModelKind::Student);
    CHECK(back.config == m.config());
    CHECK(back.vocabulary.entries() == tiny_vocab().entries());
    CHECK(back.ontology.to_json() == toy_ontology().to_json());
    const StudentModel restored = student_from_checkpoint(back);
    for (std::size_t i = 0; i < m.parameters().items().size(); ++i) {
        CHECK(restored.parameters().items()[i].name == m.parameters().items()[i].name);
        CHECK(restored.parameters().items()[i].value == m.parameters().items()[i].value);
    }
    CHECK(encode_checkpoint(make_checkpoint(restored, tiny_vocab(), toy_ontology())) == bytes);
}

TEST_CASE("teacher checkpoint keeps domain and belief size") {
    const TeacherModel t(tiny(), "taxi", 3);
    const Checkpoint back = decode_checkpoint(encode_checkpoint(make_checkpoint(t, tiny_vocab(), toy_ontology())));
    CHECK(back.kind == ModelKind::Teacher);
    const TeacherModel restored = teacher_from_checkpoint(back);
    CHECK(restored.domain() == "taxi");
    CHECK(restored.belief_dim() == 3);
    CHECK_THROWS_AS(student_from_checkpoint(back), CheckpointError);
}

TEST_CASE("checkpoint file save and load") {
    const auto path = std::filesystem::temp_directory_path() / "tsdial_test_ckpt.bin";
    const StudentModel m(tiny());
    const Checkpoint c = make_checkpoint(m, tiny_vocab(), toy_ontology());
    save_checkpoint(path, c);
    CHECK(encode_checkpoint(load_checkpoint(path)) == encode_checkpoint(c));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
}

TEST_CASE("corrupt checkpoints are rejected") {
    const StudentModel m(tiny());
    std::string bytes = encode_checkpoint(make_checkpoint(m, tiny_vocab(), toy_ontology()));
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
    CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), CheckpointError);
    CHECK_THROWS_AS(decode_checkpoint("NOTACKPT"), CheckpointError);

    std::string wrong = bytes;
    wrong[8] = 7;
    try {
        decode_checkpoint(wrong);
        FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
        CHECK(std::string(e.what()).find("expected version 1") != std::string::npos);
    }
}
