#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "oracles/oracles.hpp"
#include "paramp/io/csv.hpp"
#include "paramp/io/json.hpp"
#include "paramp/io/svg.hpp"

using namespace paramp;
using namespace paramp::io;
namespace fs = std::filesystem;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

std::string complex_csv(int rows) {
    std::string s = "freq_hz,re,im\n";
    for (int k = 0; k < rows; ++k) {
        s += std::to_string(6.0e9 + 1e6 * k) + ",0.5," + std::to_string(0.01 * k) + "\n";
    }
    return s;
}

}  // namespace

TEST(ParseTable, ErrorCitesLineAndColumn) {
    std::string text = complex_csv(20);
    // Corrupt the 16th data row, which is line 17 of the file.
    std::size_t pos = 0;
    for (int l = 1; l < 17; ++l) pos = text.find('\n', pos) + 1;
    const std::size_t end = text.find('\n', pos);
    text.replace(pos, end - pos, "6.016e9,abc,0.1");
    try {
        parse_table(text);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 17u);
        EXPECT_EQ(e.column(), 2u);
        EXPECT_NE(std::string(e.what()).find("line 17"), std::string::npos);
    }
}

TEST(ParseTable, RaggedRowAndBadHeader) {
    try {
        parse_table("a,b\n1,2\n3\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(parse_table("a,,b\n1,2,3\n"), ParseError);
    EXPECT_THROW(parse_table("# only a comment\n\n"), ValidationError);
    EXPECT_THROW(parse_table("a\n1.5x\n"), ParseError);
    EXPECT_THROW(parse_table("a\n \n1,\n"), ParseError);
}

TEST(ParseTable, HandlesBomCrlfCommentsAndSigns) {
    const auto t = parse_table("\xEF\xBB\xBF# exported\r\nfreq_hz , gain_db\r\n\r\n1e9,+3.5\r\n# mid\r\n2e9,-1\r\n");
    ASSERT_EQ(t.header, (std::vector<std::string>{"freq_hz", "gain_db"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][1], 3.5);
    EXPECT_EQ(t.rows[1][1], -1.0);
    EXPECT_EQ(t.line_numbers, (std::vector<std::size_t>{4, 6}));
    EXPECT_EQ(t.column("gain_db"), 1u);
    EXPECT_THROW(t.column("phase"), ValidationError);
    // No trailing newline.
    EXPECT_EQ(parse_table("a\n1").rows.size(), 1u);
}

TEST(TypedTraces, HeaderOnlyIsEmptyTrace) {
    try {
        complex_trace_from_table(parse_table("freq_hz,re,im\n"));
        FAIL();
    } catch (const ParseError&) {
        FAIL() << "header-only input is a validation error, not a parse error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("empty trace"), std::string::npos);
    }
    EXPECT_THROW(gain_trace_from_table(parse_table("freq_hz,gain_db\n")), ValidationError);
}

TEST(TypedTraces, ShortTraceIsValidAndSchemaIsChecked) {
    const auto tr = complex_trace_from_table(parse_table(complex_csv(3)));
    EXPECT_EQ(tr.freq.size(), 3u);
    EXPECT_NO_THROW(tr.validate());
    EXPECT_EQ(tr.s21[2], std::complex<double>(0.5, 0.02));

    EXPECT_THROW(complex_trace_from_table(parse_table("freq,re,im\n1,2,3\n")), ParseError);
    EXPECT_THROW(spectrum_from_table(parse_table("freq_hz,gain_db\n1,2\n")), ParseError);
    // Extra trailing columns are allowed.
    EXPECT_EQ(gain_trace_from_table(parse_table("freq_hz,gain_db,idler_db\n1,2,3\n")).gain_db[0], 2.0);
}

TEST(TypedTraces, NonMonotoneFrequencyCitesLine) {
    try {
        gain_trace_from_table(parse_table("# c\nfreq_hz,gain_db\n1e9,0\n2e9,1\n2e9,2\n"));
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos) << e.what();
    }
    // Kerr points are not frequency-ordered data and need no ordering.
    EXPECT_EQ(kerr_points_from_table(parse_table("n_photons,freq_hz\n5,6e9\n1,6.1e9\n")).size(), 2u);
}

TEST(RoundTrip, TracesAreBitExact) {
    const auto dir = oracle::scratch_dir("io_roundtrip");
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    fit::ComplexTrace c;
    fit::GainTrace g;
    fit::Spectrum s;
    std::vector<fit::KerrPoint> k;
    for (int i = 0; i < 500; ++i) {
        const double f = 6e9 + 1234.5678 * i + 1e-3 * u(rng);
        c.freq.push_back(f);
        c.s21.emplace_back(u(rng) * 1e-7, std::ldexp(u(rng), -900));
        g.freq.push_back(f);
        g.gain_db.push_back(20.0 * u(rng));
        s.freq.push_back(f);
        s.power_dbm.push_back(-150.0 + u(rng) / 3.0);
        k.push_back({1e4 * (1.0 + u(rng)), f});
    }
    write_complex_trace(dir / "c.csv", c);
    write_gain_trace(dir / "g.csv", g);
    write_spectrum(dir / "s.csv", s);
    write_kerr_points(dir / "k.csv", k);
    const auto c2 = read_complex_trace(dir / "c.csv");
    const auto g2 = read_gain_trace(dir / "g.csv");
    const auto s2 = read_spectrum(dir / "s.csv");
    const auto k2 = read_kerr_points(dir / "k.csv");
    ASSERT_EQ(c2.freq.size(), 500u);
    for (std::size_t i = 0; i < 500; ++i) {
        EXPECT_TRUE(same_bits(c2.freq[i], c.freq[i]));
        EXPECT_TRUE(same_bits(c2.s21[i].real(), c.s21[i].real()));
        EXPECT_TRUE(same_bits(c2.s21[i].imag(), c.s21[i].imag()));
        EXPECT_TRUE(same_bits(g2.gain_db[i], g.gain_db[i]));
        EXPECT_TRUE(same_bits(s2.power_dbm[i], s.power_dbm[i]));
        EXPECT_TRUE(same_bits(k2[i].n, k[i].n));
        EXPECT_TRUE(same_bits(k2[i].f_r, k[i].f_r));
    }
}

TEST(RoundTrip, FormatDoubleExtremes) {
    for (double v : {0.0, -0.0, 1.0 / 3.0, 5e-324, 1.7976931348623157e308, -6.02214076e23}) {
        EXPECT_TRUE(same_bits(parse_table("x\n" + format_double(v) + "\n").rows[0][0], v)) << v;
    }
}

TEST(AtomicWrite, ReplacesAndLeavesNoTemporary) {
    const auto dir = oracle::scratch_dir("io_atomic");
    const auto p = dir / "sub" / "out.txt";
    write_file_atomic(p, "first");
    write_file_atomic(p, "second");
    EXPECT_EQ(read_text_file(p), "second");
    EXPECT_FALSE(fs::exists(dir / "sub" / "out.txt.tmp"));
    std::size_t n = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "sub")) ++n;
    EXPECT_EQ(n, 1u);
    EXPECT_THROW(read_text_file(dir / "missing.csv"), ValidationError);
}

TEST(Json, StageRoundTripAndUnknownKey) {
    const auto chain = cal::readout_chain();
    const nlohmann::json j = chain;
    const auto back = j.get<cal::AmplifierChain>();
    ASSERT_EQ(back.stages.size(), chain.stages.size());
    for (std::size_t i = 0; i < back.stages.size(); ++i) {
        EXPECT_EQ(back.stages[i].name, chain.stages[i].name);
        EXPECT_EQ(back.stages[i].gain_db, chain.stages[i].gain_db);
        EXPECT_EQ(back.stages[i].noise_temperature_k, chain.stages[i].noise_temperature_k);
        EXPECT_EQ(back.stages[i].p1db_input_dbm, chain.stages[i].p1db_input_dbm);
    }
    auto bad = j;
    bad[0]["gain"] = 3.0;
    EXPECT_THROW(bad.get<cal::AmplifierChain>(), ValidationError);
    EXPECT_THROW(nlohmann::json::array().get<cal::AmplifierChain>(), ValidationError);

    const kerr::KerrMode m{6.4e9, 128e6, 1.6e6, -20e3};
    const nlohmann::json jm = m;
    const auto m2 = jm.get<kerr::KerrMode>();
    EXPECT_EQ(m2.f0, m.f0);
    EXPECT_EQ(m2.kerr, m.kerr);
}

TEST(Svg, WellFormedWithLegend) {
    const std::string s = svg_line_plot("gain", "f (GHz)", "G (dB)",
                                        {{"signal", {1, 2, 3}, {0, NAN, 2}}, {"idler", {1, 3}, {1, 1}}});
    EXPECT_EQ(s.rfind("<svg", 0), 0u);
    EXPECT_NE(s.find("</svg>"), std::string::npos);
    EXPECT_NE(s.find("signal"), std::string::npos);
    EXPECT_NE(s.find("idler"), std::string::npos);
    EXPECT_EQ(s.find("nan"), std::string::npos);
    EXPECT_NO_THROW(svg_line_plot("empty", "x", "y", {}));
}
