package text;

import org.junit.Assert;
import static org.junit.Assert.assertSame;
import org.junit.Test;

public class StringPadTest {

    @Test
    public void testRightPad() {
        StringPad pad = new StringPad(' ');
        Assert.assertEquals("ab ", pad.right("ab", 3));
    }

    @Test
    public void testWidthSpreadsAcrossLines() {
        StringPad pad = new StringPad('.');
        Assert.assertEquals(
            5,
            pad.width("ab", 5));
    }

    @Test
    public void testSame() {
        StringPad pad = new StringPad('x');
        StringPad other = pad.self();
        assertSame(pad, other);
    }
}
