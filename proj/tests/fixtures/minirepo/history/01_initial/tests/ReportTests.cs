using System.Collections.Generic;
using MiniTest;
using Mini.Text;

namespace Mini.Tests
{
    public class ReportTests
    {
        [Test]
        public void DescribeListsItems()
        {
            var report = new Report();
            Assert.AreEqual("Items: x y", report.Describe(new List<string> { "x", "y" }));
            Assert.AreEqual("Items:", report.Describe(new List<string>()));
        }

        [Test]
        public void DescribeIsRepeatable()
        {
            var report = new Report();
            report.Describe(new List<string> { "first" });
            Assert.AreEqual("Items: second", report.Describe(new List<string> { "second" }));
        }

        [Test]
        public void TotalLengthSumsItems()
        {
            var report = new Report();
            Assert.AreEqual(6, report.TotalLength(new List<string> { "ab", "cdef" }));
        }
    }
}
