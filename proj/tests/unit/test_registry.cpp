// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/registry.hpp>

#include <fixtures.hpp>
#include <gtest/gtest.h>

using namespace kumo;
using namespace kumo::testing;

TEST(Registry, RegisterListLoad)
{
    TempDir dir;
    Registry reg(dir.path());
    EXPECT_TRUE(reg.list().empty());
    const DomainProposal p { "g", "t", "a" };
    reg.register_environment(p, fixture_config(1, "Alpha"));
    reg.register_environment(p, fixture_config(2, "Beta"));

    const auto all = reg.list();
    ASSERT_EQ(all.size(), 2u);
    EXPECT_EQ(all[0].name, "Alpha");
    EXPECT_EQ(reg.load("Beta"), fixture_config(2, "Beta"));
    EXPECT_EQ(reg.load_proposal("Alpha"), p);
    EXPECT_FALSE(reg.find("Gamma").has_value());

    // A second handle on the same directory sees the same index.
    EXPECT_EQ(Registry(dir.path()).list().size(), 2u);
}

TEST(Registry, RejectsDuplicatesAndInvalidConfigs)
{
    TempDir dir;
    Registry reg(dir.path());
    reg.register_environment({ "g", "t", "a" }, fixture_config(1, "Alpha"));
    EXPECT_THROW(reg.register_environment({ "g", "t", "a" }, fixture_config(3, "Alpha")), DuplicateEnvironment);

    auto bad = fixture_config(4, "Broken");
    bad.actions[0].states.resize(1);
    EXPECT_THROW(reg.register_environment({ "g", "t", "a" }, bad), InvalidConfig);
    EXPECT_THROW((void)reg.load("Broken"), UnknownEnvironment);
}

TEST(Registry, BooksLiveNextToConfigs)
{
    TempDir dir;
    Registry reg(dir.path());
    reg.register_environment({ "g", "t", "a" }, fixture_config(1, "Odd name / with slash"));
    EXPECT_FALSE(reg.load_book("Odd name / with slash").has_value());
    reg.save_book("Odd name / with slash", "# Book\n");
    EXPECT_EQ(reg.load_book("Odd name / with slash"), std::optional<std::string>("# Book\n"));
    EXPECT_THROW(reg.save_book("Missing", "x"), UnknownEnvironment);
}
