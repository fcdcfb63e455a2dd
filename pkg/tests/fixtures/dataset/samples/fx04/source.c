void fill_header_bounded(char *out, int n)
{
    char hdr[8];
    int i;
    if (n > 7)
        n = 7;
    for (i = 0; i <= n; i++)
        hdr[i] = (char)(i + 65);
    out[0] = hdr[0];
}
